#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace compforest {

/// A real function of one variable `x`, parsed from text.
///
/// Grammar: numbers, `x`, the constants `pi` and `e`, binary `+ - * / ^`
/// (`^` is right-associative and binds tighter than unary minus), parentheses,
/// and the functions log, exp, sqrt, abs (one argument) and min, max, pow
/// (two arguments). The parsed form is a flat postfix program, so evaluation
/// does no allocation.
class Expression {
public:
    /// Throws ConfigError on syntax errors, with the column in the message.
    static Expression parse(std::string_view text);

    double operator()(double x) const;
    const std::string& text() const { return text_; }

private:
    enum class Op : unsigned char {
        Const, Var, Add, Sub, Mul, Div, Pow, Neg, Log, Exp, Sqrt, Abs, Min, Max
    };
    struct Instr {
        Op op;
        double value;
    };
    friend class ExpressionParser;

    std::string text_;
    std::vector<Instr> program_;
    std::size_t max_stack_ = 0;
};

/// Piecewise function: pieces[i] applies on [knots[i-1], knots[i]), with the
/// first piece starting at 0 and the last one unbounded. Requires
/// pieces.size() == knots.size() + 1 and strictly increasing positive knots.
class PiecewiseExpression {
public:
    PiecewiseExpression(std::vector<Expression> pieces, std::vector<double> knots);

    double operator()(double x) const;
    std::string describe() const;

    const std::vector<double>& knots() const { return knots_; }
    const std::vector<Expression>& pieces() const { return pieces_; }

private:
    std::vector<Expression> pieces_;
    std::vector<double> knots_;
};

}  // namespace compforest
