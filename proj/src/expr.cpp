#include "actangle/expr.hpp"

#include <array>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <numbers>

#include "actangle/error.hpp"

namespace actangle {

namespace {

struct FunctionInfo {
    std::string_view name;
    Function fn;
    int arity;
};

constexpr std::array<FunctionInfo, 7> kFunctions{{
    {"sin", Function::Sin, 1},
    {"cos", Function::Cos, 1},
    {"tan", Function::Tan, 1},
    {"exp", Function::Exp, 1},
    {"log", Function::Log, 1},
    {"sqrt", Function::Sqrt, 1},
    {"atan2", Function::Atan2, 2},
}};

std::string_view function_name(Function fn) {
    for (const auto& f : kFunctions)
        if (f.fn == fn) return f.name;
    return "?";
}

Node make_node(NodeKind kind) {
    Node n;
    n.kind = kind;
    return n;
}

bool is_ident_start(char c) { return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_'; }
bool is_digit(char c) { return c >= '0' && c <= '9'; }

class Parser {
public:
    Parser(std::string_view src, int dimension, ParseOptions options)
        : src_(src), dimension_(dimension), options_(options) {}

    Node run() {
        Node n = expression();
        skip_space();
        if (pos_ != src_.size()) fail("unexpected '" + std::string(1, src_[pos_]) + "'");
        return n;
    }

    bool used_time() const { return used_time_; }

private:
    [[noreturn]] void fail(const std::string& msg) const { throw ParseError(msg, pos_); }
    [[noreturn]] void fail_at(const std::string& msg, std::size_t at) const { throw ParseError(msg, at); }

    void skip_space() {
        while (pos_ < src_.size() && (src_[pos_] == ' ' || src_[pos_] == '\t' || src_[pos_] == '\n' ||
                                      src_[pos_] == '\r'))
            ++pos_;
    }

    bool accept(char c) {
        skip_space();
        if (pos_ < src_.size() && src_[pos_] == c) {
            ++pos_;
            return true;
        }
        return false;
    }

    void expect(char c) {
        if (!accept(c)) {
            if (pos_ >= src_.size()) fail(std::string("expected '") + c + "' but input ended");
            fail(std::string("expected '") + c + "'");
        }
    }

    static Node binary(NodeKind kind, Node lhs, Node rhs) {
        Node n = make_node(kind);
        n.args.push_back(std::move(lhs));
        n.args.push_back(std::move(rhs));
        return n;
    }

    Node expression() {
        Node lhs = term();
        for (;;) {
            if (accept('+'))
                lhs = binary(NodeKind::Add, std::move(lhs), term());
            else if (accept('-'))
                lhs = binary(NodeKind::Sub, std::move(lhs), term());
            else
                return lhs;
        }
    }

    Node term() {
        Node lhs = unary();
        for (;;) {
            if (accept('*'))
                lhs = binary(NodeKind::Mul, std::move(lhs), unary());
            else if (accept('/'))
                lhs = binary(NodeKind::Div, std::move(lhs), unary());
            else
                return lhs;
        }
    }

    Node unary() {
        if (accept('-')) {
            Node n = make_node(NodeKind::Neg);
            n.args.push_back(unary());
            return n;
        }
        return power();
    }

    Node power() {
        Node base = primary();
        if (accept('^')) return binary(NodeKind::Pow, std::move(base), unary());
        return base;
    }

    Node primary() {
        skip_space();
        if (pos_ >= src_.size()) fail("unexpected end of input");
        const char c = src_[pos_];
        if (c == '(') {
            ++pos_;
            Node n = expression();
            expect(')');
            return n;
        }
        if (is_digit(c) || c == '.') return number();
        if (is_ident_start(c)) return identifier();
        fail("unexpected '" + std::string(1, c) + "'");
    }

    Node number() {
        const std::size_t start = pos_;
        while (pos_ < src_.size() && (is_digit(src_[pos_]) || src_[pos_] == '.')) ++pos_;
        if (pos_ < src_.size() && (src_[pos_] == 'e' || src_[pos_] == 'E')) {
            std::size_t look = pos_ + 1;
            if (look < src_.size() && (src_[look] == '+' || src_[look] == '-')) ++look;
            if (look < src_.size() && is_digit(src_[look])) {
                pos_ = look;
                while (pos_ < src_.size() && is_digit(src_[pos_])) ++pos_;
            }
        }
        double value = 0.0;
        const char* first = src_.data() + start;
        const char* last = src_.data() + pos_;
        auto [ptr, ec] = std::from_chars(first, last, value);
        if (ec != std::errc() || ptr != last) fail_at("malformed number", start);
        if (pos_ < src_.size() && is_ident_start(src_[pos_]))
            fail("implicit multiplication is not supported");
        Node n = make_node(NodeKind::Number);
        n.number = value;
        return n;
    }

    Node identifier() {
        const std::size_t start = pos_;
        while (pos_ < src_.size() && (is_ident_start(src_[pos_]) || is_digit(src_[pos_]))) ++pos_;
        const std::string_view name = src_.substr(start, pos_ - start);

        for (const auto& f : kFunctions) {
            if (f.name != name) continue;
            if (!accept('(')) fail("function '" + std::string(name) + "' requires an argument list");
            Node call = make_node(NodeKind::Call);
            call.index = static_cast<int>(f.fn);
            if (!accept(')')) {
                do {
                    call.args.push_back(expression());
                } while (accept(','));
                expect(')');
            }
            if (static_cast<int>(call.args.size()) != f.arity)
                fail_at("function '" + std::string(name) + "' takes " + std::to_string(f.arity) +
                            " argument(s), got " + std::to_string(call.args.size()),
                        start);
            return call;
        }

        if (name == "pi") return make_node(NodeKind::Pi);
        if (name == "t") {
            if (!options_.allow_time) fail_at("time variable 't' is not allowed here", start);
            used_time_ = true;
            return make_node(NodeKind::Time);
        }
        if ((name[0] == 'q' || name[0] == 'p') && name.size() >= 2) {
            int k = 0;
            auto [ptr, ec] = std::from_chars(name.data() + 1, name.data() + name.size(), k);
            if (ec == std::errc() && ptr == name.data() + name.size() && name[1] != '0' && k >= 1) {
                if (k > dimension_)
                    fail_at("variable '" + std::string(name) + "' exceeds dimension " +
                                std::to_string(dimension_),
                            start);
                Node v = make_node(NodeKind::Variable);
                v.index = (name[0] == 'q' ? 0 : dimension_) + (k - 1);
                return v;
            }
        }
        fail_at("unknown identifier '" + std::string(name) + "'", start);
    }

    std::string_view src_;
    int dimension_;
    ParseOptions options_;
    std::size_t pos_ = 0;
    bool used_time_ = false;
};

bool is_constant(const Node& n) {
    if (n.kind == NodeKind::Variable || n.kind == NodeKind::Time) return false;
    for (const auto& a : n.args)
        if (!is_constant(a)) return false;
    return true;
}

using Op = Expression::Instr::Op;

// Postfix compilation; returns the stack depth reached.
int compile(const Node& n, std::vector<Expression::Instr>& out, int depth, double (*fold)(const Node&)) {
    auto push = [&](Op op, double number = 0.0, int index = 0) { out.push_back({op, number, index}); };
    switch (n.kind) {
        case NodeKind::Number: push(Op::Number, n.number); return depth + 1;
        case NodeKind::Pi: push(Op::Number, std::numbers::pi); return depth + 1;
        case NodeKind::Variable: push(Op::Variable, 0.0, n.index); return depth + 1;
        case NodeKind::Time: push(Op::Time); return depth + 1;
        case NodeKind::Neg: {
            int d = compile(n.args[0], out, depth, fold);
            push(Op::Neg);
            return d;
        }
        case NodeKind::Pow: {
            if (is_constant(n.args[1])) {
                const double k = fold(n.args[1]);
                if (std::isfinite(k) && k == std::round(k) && std::abs(k) < 1e9) {
                    int d = compile(n.args[0], out, depth, fold);
                    push(Op::PowInt, k);
                    return d;
                }
            }
            [[fallthrough]];
        }
        case NodeKind::Add:
        case NodeKind::Sub:
        case NodeKind::Mul:
        case NodeKind::Div: {
            int d0 = compile(n.args[0], out, depth, fold);
            int d1 = compile(n.args[1], out, depth + 1, fold);
            static constexpr Op ops[] = {Op::Add, Op::Sub, Op::Mul, Op::Div, Op::Pow};
            const int which = n.kind == NodeKind::Add   ? 0
                              : n.kind == NodeKind::Sub ? 1
                              : n.kind == NodeKind::Mul ? 2
                              : n.kind == NodeKind::Div ? 3
                                                        : 4;
            push(ops[which]);
            return std::max(d0, d1);
        }
        case NodeKind::Call: {
            int d = depth;
            for (std::size_t i = 0; i < n.args.size(); ++i)
                d = std::max(d, compile(n.args[i], out, depth + static_cast<int>(i), fold));
            static constexpr Op ops[] = {Op::Sin, Op::Cos, Op::Tan, Op::Exp, Op::Log, Op::Sqrt, Op::Atan2};
            push(ops[n.index]);
            return d;
        }
    }
    return depth;
}

// Scalar types for the shared evaluator: plain values and forward-mode duals.
struct Dual {
    double v = 0.0;
    std::array<double, kMaxVars> d{};
};

[[noreturn]] void domain(const char* what) { throw DomainError(what); }

struct RealOps {
    using T = double;
    static T constant(double c) { return c; }
    static T variable(double x, int) { return x; }
    static double value(const T& a) { return a; }
    static T neg(const T& a) { return -a; }
    static T add(const T& a, const T& b) { return a + b; }
    static T sub(const T& a, const T& b) { return a - b; }
    static T mul(const T& a, const T& b) { return a * b; }
    static T div(const T& a, const T& b) {
        if (b == 0.0) domain("division by zero");
        return a / b;
    }
    static T chain(const T&, double f, double) { return f; }
    static T chain2(const T&, const T&, double f, double, double) { return f; }
};

struct DualOps {
    using T = Dual;
    static T constant(double c) { return Dual{c, {}}; }
    static T variable(double x, int i) {
        Dual r{x, {}};
        r.d[i] = 1.0;
        return r;
    }
    static double value(const T& a) { return a.v; }
    static T neg(const T& a) {
        Dual r{-a.v, {}};
        for (int k = 0; k < kMaxVars; ++k) r.d[k] = -a.d[k];
        return r;
    }
    static T add(const T& a, const T& b) {
        Dual r{a.v + b.v, {}};
        for (int k = 0; k < kMaxVars; ++k) r.d[k] = a.d[k] + b.d[k];
        return r;
    }
    static T sub(const T& a, const T& b) {
        Dual r{a.v - b.v, {}};
        for (int k = 0; k < kMaxVars; ++k) r.d[k] = a.d[k] - b.d[k];
        return r;
    }
    static T mul(const T& a, const T& b) {
        Dual r{a.v * b.v, {}};
        for (int k = 0; k < kMaxVars; ++k) r.d[k] = a.d[k] * b.v + a.v * b.d[k];
        return r;
    }
    static T div(const T& a, const T& b) {
        if (b.v == 0.0) domain("division by zero");
        const double inv = 1.0 / b.v;
        const double q = a.v * inv;
        Dual r{q, {}};
        for (int k = 0; k < kMaxVars; ++k) r.d[k] = (a.d[k] - q * b.d[k]) * inv;
        return r;
    }
    // f(a) with f'(a) = df
    static T chain(const T& a, double f, double df) {
        Dual r{f, {}};
        for (int k = 0; k < kMaxVars; ++k) r.d[k] = df * a.d[k];
        return r;
    }
    // f(a, b) with partials fa, fb
    static T chain2(const T& a, const T& b, double f, double fa, double fb) {
        Dual r{f, {}};
        for (int k = 0; k < kMaxVars; ++k) r.d[k] = fa * a.d[k] + fb * b.d[k];
        return r;
    }
};

template <class Ops>
typename Ops::T run(const std::vector<Expression::Instr>& program, int max_stack, std::span<const double> z,
                    double t) {
    using T = typename Ops::T;
    constexpr int kInline = 32;
    std::array<T, kInline> inline_stack{};
    std::vector<T> heap_stack;
    T* stack = inline_stack.data();
    if (max_stack > kInline) {
        heap_stack.resize(max_stack);
        stack = heap_stack.data();
    }
    int top = 0;
    for (const auto& ins : program) {
        switch (ins.op) {
            case Op::Number: stack[top++] = Ops::constant(ins.number); break;
            case Op::Variable: stack[top++] = Ops::variable(z[ins.index], ins.index); break;
            case Op::Time: stack[top++] = Ops::constant(t); break;
            case Op::Neg: stack[top - 1] = Ops::neg(stack[top - 1]); break;
            case Op::Add: --top; stack[top - 1] = Ops::add(stack[top - 1], stack[top]); break;
            case Op::Sub: --top; stack[top - 1] = Ops::sub(stack[top - 1], stack[top]); break;
            case Op::Mul: --top; stack[top - 1] = Ops::mul(stack[top - 1], stack[top]); break;
            case Op::Div: --top; stack[top - 1] = Ops::div(stack[top - 1], stack[top]); break;
            case Op::PowInt: {
                T& a = stack[top - 1];
                const double x = Ops::value(a);
                const double k = ins.number;
                if (x == 0.0 && k < 0) domain("zero raised to a negative power");
                const double f = std::pow(x, k);
                const double df = k == 0.0 ? 0.0 : k * std::pow(x, k - 1.0);
                a = Ops::chain(a, f, df);
                break;
            }
            case Op::Pow: {
                --top;
                T& a = stack[top - 1];
                const T& b = stack[top];
                const double x = Ops::value(a), y = Ops::value(b);
                if (!(x > 0.0)) domain("non-integer power of a nonpositive base");
                const double f = std::pow(x, y);
                a = Ops::chain2(a, b, f, y * std::pow(x, y - 1.0), f * std::log(x));
                break;
            }
            case Op::Sin: {
                T& a = stack[top - 1];
                const double x = Ops::value(a);
                a = Ops::chain(a, std::sin(x), std::cos(x));
                break;
            }
            case Op::Cos: {
                T& a = stack[top - 1];
                const double x = Ops::value(a);
                a = Ops::chain(a, std::cos(x), -std::sin(x));
                break;
            }
            case Op::Tan: {
                T& a = stack[top - 1];
                const double x = Ops::value(a);
                const double c = std::cos(x);
                if (c == 0.0) domain("tan at a pole");
                a = Ops::chain(a, std::tan(x), 1.0 / (c * c));
                break;
            }
            case Op::Exp: {
                T& a = stack[top - 1];
                const double e = std::exp(Ops::value(a));
                a = Ops::chain(a, e, e);
                break;
            }
            case Op::Log: {
                T& a = stack[top - 1];
                const double x = Ops::value(a);
                if (!(x > 0.0)) domain("log of a nonpositive argument");
                a = Ops::chain(a, std::log(x), 1.0 / x);
                break;
            }
            case Op::Sqrt: {
                T& a = stack[top - 1];
                const double x = Ops::value(a);
                if (x < 0.0) domain("sqrt of a negative argument");
                const double s = std::sqrt(x);
                a = Ops::chain(a, s, s > 0.0 ? 0.5 / s : HUGE_VAL);
                break;
            }
            case Op::Atan2: {
                --top;
                T& a = stack[top - 1];
                const T& b = stack[top];
                const double y = Ops::value(a), x = Ops::value(b);
                const double r2 = x * x + y * y;
                if (r2 == 0.0) domain("atan2(0, 0)");
                a = Ops::chain2(a, b, std::atan2(y, x), x / r2, -y / r2);
                break;
            }
        }
    }
    return stack[0];
}

double fold_constant(const Node& n) {
    std::vector<Expression::Instr> prog;
    const int depth = compile(n, prog, 0, &fold_constant);
    return run<RealOps>(prog, depth, {}, 0.0);
}

void print_leaf(const Node& n, std::string& out) {
    switch (n.kind) {
        case NodeKind::Number: {
            char buf[40];
            std::snprintf(buf, sizeof buf, "%.17g", n.number);
            out += buf;
            return;
        }
        case NodeKind::Pi: out += "pi"; return;
        case NodeKind::Time: out += "t"; return;
        default: return;
    }
}

void print_vars(const Node& n, int dimension, std::string& out) {
    if (n.kind == NodeKind::Variable) {
        const bool is_q = n.index < dimension;
        out += (is_q ? "q" : "p") + std::to_string((is_q ? n.index : n.index - dimension) + 1);
        return;
    }
    if (n.args.empty()) {
        print_leaf(n, out);
        return;
    }
    if (n.kind == NodeKind::Neg) {
        out += "(-";
        print_vars(n.args[0], dimension, out);
        out += ")";
        return;
    }
    if (n.kind == NodeKind::Call) {
        out += function_name(static_cast<Function>(n.index));
        out += "(";
        for (std::size_t i = 0; i < n.args.size(); ++i) {
            if (i) out += ", ";
            print_vars(n.args[i], dimension, out);
        }
        out += ")";
        return;
    }
    const char* op = n.kind == NodeKind::Add   ? " + "
                     : n.kind == NodeKind::Sub ? " - "
                     : n.kind == NodeKind::Mul ? " * "
                     : n.kind == NodeKind::Div ? " / "
                                               : "^";
    out += "(";
    print_vars(n.args[0], dimension, out);
    out += op;
    print_vars(n.args[1], dimension, out);
    out += ")";
}

}  // namespace

Expression parse(std::string_view source, int dimension, ParseOptions options) {
    if (dimension < 1 || dimension > kMaxDof)
        throw PreconditionError("expression dimension must be in [1, " + std::to_string(kMaxDof) + "]");
    Parser parser(source, dimension, options);
    Expression e;
    e.root_ = parser.run();
    e.dimension_ = dimension;
    e.uses_time_ = parser.used_time();
    e.source_ = std::string(source);
    e.max_stack_ = compile(e.root_, e.program_, 0, &fold_constant);
    return e;
}

double Expression::eval(std::span<const double> z, double t) const {
    if (static_cast<int>(z.size()) < num_vars()) throw PreconditionError("point has wrong dimension");
    const double v = run<RealOps>(program_, max_stack_, z, t);
    if (!std::isfinite(v)) throw DomainError("expression evaluated to a non-finite value");
    return v;
}

double Expression::eval_with_gradient(std::span<const double> z, std::span<double> grad, double t) const {
    if (static_cast<int>(z.size()) < num_vars() || static_cast<int>(grad.size()) < num_vars())
        throw PreconditionError("point has wrong dimension");
    const Dual r = run<DualOps>(program_, max_stack_, z, t);
    if (!std::isfinite(r.v)) throw DomainError("expression evaluated to a non-finite value");
    for (int k = 0; k < num_vars(); ++k) {
        if (!std::isfinite(r.d[k])) throw DomainError("derivative is not finite at this point");
        grad[k] = r.d[k];
    }
    return r.v;
}

ValueGradient Expression::eval_with_gradient(std::span<const double> z, double t) const {
    ValueGradient out;
    out.gradient.resize(num_vars());
    out.value = eval_with_gradient(z, out.gradient, t);
    return out;
}

std::string Expression::print() const {
    std::string out;
    print_vars(root_, dimension_, out);
    return out;
}

}  // namespace actangle
