#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace actangle {

/// Largest number of degrees of freedom an expression may reference.
inline constexpr int kMaxDof = 4;
inline constexpr int kMaxVars = 2 * kMaxDof;

enum class NodeKind { Number, Variable, Time, Pi, Neg, Add, Sub, Mul, Div, Pow, Call };

enum class Function { Sin, Cos, Tan, Exp, Log, Sqrt, Atan2 };

/// Expression tree node. Variables are indexed in phase-space order:
/// q1..qn map to 0..n-1 and p1..pn map to n..2n-1.
struct Node {
    NodeKind kind = NodeKind::Number;
    double number = 0.0;
    int index = 0;  // variable slot for Variable, Function for Call
    std::vector<Node> args;

    bool operator==(const Node&) const = default;
};

struct ParseOptions {
    /// Accept the explicit time symbol `t`. Autonomous systems leave this off.
    bool allow_time = false;
};

struct ValueGradient {
    double value = 0.0;
    std::vector<double> gradient;  // size 2n, phase-space order
};

/// A parsed scalar function of (q, p[, t]). Immutable; evaluation is thread safe.
class Expression {
public:
    struct Instr {
        enum class Op {
            Number, Variable, Time, Neg, Add, Sub, Mul, Div, PowInt, Pow,
            Sin, Cos, Tan, Exp, Log, Sqrt, Atan2
        };
        Op op;
        double number = 0.0;
        int index = 0;
    };

    Expression() = default;

    int dimension() const { return dimension_; }
    int num_vars() const { return 2 * dimension_; }
    bool uses_time() const { return uses_time_; }
    const Node& root() const { return root_; }
    const std::string& source() const { return source_; }

    double eval(std::span<const double> z, double t = 0.0) const;

    /// Value and exact gradient (forward-mode dual numbers). `grad` must hold 2n entries.
    double eval_with_gradient(std::span<const double> z, std::span<double> grad,
                              double t = 0.0) const;
    ValueGradient eval_with_gradient(std::span<const double> z, double t = 0.0) const;

    /// Canonical, fully parenthesized text that parses back to the same tree.
    std::string print() const;

private:
    friend Expression parse(std::string_view, int, ParseOptions);

    int dimension_ = 0;
    bool uses_time_ = false;
    std::string source_;
    Node root_;
    std::vector<Instr> program_;
    int max_stack_ = 0;
};

/// Parse `source` over variables q1..qn, p1..pn. Throws ParseError on syntax errors,
/// unknown identifiers and arity mismatches.
Expression parse(std::string_view source, int dimension, ParseOptions options = {});

}  // namespace actangle
