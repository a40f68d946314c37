#pragma once

// arithmetic expressions over x1..xd and t so initial data and velocity
// components can be given on the command line. recursive descent with the
// usual precedence (^ right-associative, then unary minus, then * /, then
// + -), five functions, no implicit multiplication, radians, doubles.

#include <string>
#include <vector>

#include "pmreg/common.hpp"

namespace pmreg {

struct parse_error : error {
    int offset;
    std::string expected;
    parse_error(int off, std::string exp)
        : error("parse error at offset " + std::to_string(off) + ": expected " + exp),
          offset(off),
          expected(std::move(exp)) {}
};

struct eval_error : error {
    using error::error;
};

class field_expr {
   public:
    static field_expr parse(const std::string& text, int dim) {
        field_expr e;
        e.dim_ = dim;
        parser p{text, 0, &e, dim, 0};
        e.root_ = p.expr();
        p.skip_ws();
        if (p.pos != text.size()) throw parse_error(int(p.pos), "end of input or operator");
        return e;
    }

    double eval(const double* x, int dim, double t) const {
        if (dim < dim_) throw eval_error("point dimension below expression arity");
        return eval_node(root_, x, t);
    }
    template <std::size_t D> double operator()(const vec<D>& x, double t = 0) const {
        return eval(x.data(), int(D), t);
    }

    std::string print() const { return print_node(root_); }
    int dim() const { return dim_; }

   private:
    enum class op : std::uint8_t { num, var, tvar, add, sub, mul, div, pow, neg, fn };
    struct node {
        op k;
        double value = 0;
        int a = -1, b = -1;
        int slot = 0;  // variable index or function id
    };
    static constexpr const char* fn_names[5] = {"sin", "cos", "exp", "sqrt", "abs"};

    std::vector<node> nodes_;
    int root_ = -1;
    int dim_ = 0;

    int add_node(node n) {
        nodes_.push_back(n);
        return int(nodes_.size()) - 1;
    }

    struct parser {
        const std::string& s;
        std::size_t pos;
        field_expr* e;
        int dim;
        int depth;

        void skip_ws() {
            while (pos < s.size() && std::isspace(std::uint8_t(s[pos]))) ++pos;
        }
        bool accept(char c) {
            skip_ws();
            if (pos < s.size() && s[pos] == c) {
                ++pos;
                return true;
            }
            return false;
        }
        struct depth_guard {
            parser& p;
            explicit depth_guard(parser& pp) : p(pp) {
                if (++p.depth > 64) throw parse_error(int(p.pos), "shallower nesting (max 64)");
            }
            ~depth_guard() { --p.depth; }
        };

        int expr() {
            depth_guard g(*this);
            int a = term();
            while (true) {
                skip_ws();
                if (accept('+'))
                    a = e->add_node({op::add, 0, a, term()});
                else if (accept('-'))
                    a = e->add_node({op::sub, 0, a, term()});
                else
                    return a;
            }
        }
        int term() {
            depth_guard g(*this);
            int a = unary();
            while (true) {
                skip_ws();
                if (accept('*'))
                    a = e->add_node({op::mul, 0, a, unary()});
                else if (accept('/'))
                    a = e->add_node({op::div, 0, a, unary()});
                else
                    return a;
            }
        }
        int unary() {
            depth_guard g(*this);
            if (accept('-')) return e->add_node({op::neg, 0, unary()});
            return power();
        }
        int power() {
            depth_guard g(*this);
            int a = primary();
            if (accept('^')) return e->add_node({op::pow, 0, a, unary()});
            return a;
        }
        int primary() {
            depth_guard g(*this);
            skip_ws();
            if (pos >= s.size())
                throw parse_error(int(pos), "number, variable, function or '('");
            char c = s[pos];
            if (c == '(') {
                ++pos;
                int a = expr();
                if (!accept(')')) throw parse_error(int(pos), "')'");
                return a;
            }
            if (std::isdigit(std::uint8_t(c)) || c == '.') {
                const char* start = s.c_str() + pos;
                char* end = nullptr;
                double v = std::strtod(start, &end);
                if (end == start) throw parse_error(int(pos), "number");
                pos += std::size_t(end - start);
                return e->add_node({op::num, v});
            }
            if (std::isalpha(std::uint8_t(c)) || c == '_') {
                std::size_t start = pos;
                while (pos < s.size() &&
                       (std::isalnum(std::uint8_t(s[pos])) || s[pos] == '_'))
                    ++pos;
                std::string id = s.substr(start, pos - start);
                if (id == "t") return e->add_node({op::tvar});
                if (id.size() >= 2 && id[0] == 'x' && std::isdigit(std::uint8_t(id[1]))) {
                    int vi = std::atoi(id.c_str() + 1);
                    if (vi < 1 || vi > dim)
                        throw parse_error(int(start), "variable index within 1..dim");
                    node n{op::var};
                    n.slot = vi - 1;
                    return e->add_node(n);
                }
                for (int f = 0; f < 5; ++f) {
                    if (id == fn_names[f]) {
                        if (!accept('(')) throw parse_error(int(pos), "'(' after function name");
                        int a = expr();
                        if (!accept(')')) throw parse_error(int(pos), "')'");
                        node n{op::fn, 0, a};
                        n.slot = f;
                        return e->add_node(n);
                    }
                }
                throw parse_error(int(start), "known identifier (x1..xd, t, sin, cos, exp, sqrt, abs)");
            }
            throw parse_error(int(pos), "number, variable, function or '('");
        }
    };

    double eval_node(int i, const double* x, double t) const {
        const node& n = nodes_[i];
        switch (n.k) {
            case op::num: return n.value;
            case op::var: return x[n.slot];
            case op::tvar: return t;
            case op::add: return eval_node(n.a, x, t) + eval_node(n.b, x, t);
            case op::sub: return eval_node(n.a, x, t) - eval_node(n.b, x, t);
            case op::mul: return eval_node(n.a, x, t) * eval_node(n.b, x, t);
            case op::div: {
                double den = eval_node(n.b, x, t);
                if (den == 0.0) throw eval_error("division by zero");
                return check(eval_node(n.a, x, t) / den);
            }
            case op::pow: return check(std::pow(eval_node(n.a, x, t), eval_node(n.b, x, t)));
            case op::neg: return -eval_node(n.a, x, t);
            default: {
                double v = eval_node(n.a, x, t);
                switch (n.slot) {
                    case 0: return std::sin(v);
                    case 1: return std::cos(v);
                    case 2: return check(std::exp(v));
                    case 3:
                        if (v < 0.0) throw eval_error("sqrt of negative value");
                        return std::sqrt(v);
                    default: return std::abs(v);
                }
            }
        }
    }
    static double check(double v) {
        if (!std::isfinite(v)) throw eval_error("non-finite result");
        return v;
    }

    std::string print_node(int i) const {
        const node& n = nodes_[i];
        char buf[40];
        switch (n.k) {
            case op::num:
                std::snprintf(buf, sizeof buf, "%.17g", n.value);
                return buf;
            case op::var: return "x" + std::to_string(n.slot + 1);
            case op::tvar: return "t";
            case op::add: return "(" + print_node(n.a) + " + " + print_node(n.b) + ")";
            case op::sub: return "(" + print_node(n.a) + " - " + print_node(n.b) + ")";
            case op::mul: return "(" + print_node(n.a) + " * " + print_node(n.b) + ")";
            case op::div: return "(" + print_node(n.a) + " / " + print_node(n.b) + ")";
            case op::pow: return "(" + print_node(n.a) + " ^ " + print_node(n.b) + ")";
            case op::neg: return "(-" + print_node(n.a) + ")";
            default: return std::string(fn_names[n.slot]) + "(" + print_node(n.a) + ")";
        }
    }
};

}  // namespace pmreg
