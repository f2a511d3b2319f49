#include "compforest/expression.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <numbers>
#include <sstream>

#include "compforest/errors.hpp"

namespace compforest {

class ExpressionParser {
public:
    explicit ExpressionParser(std::string_view src) : src_(src) {}

    Expression run() {
        Expression e;
        e.text_ = std::string(src_);
        out_ = &e.program_;
        parse_sum();
        skip_ws();
        if (pos_ != src_.size()) fail("unexpected '" + std::string(1, src_[pos_]) + "'");
        e.max_stack_ = max_depth_;
        return e;
    }

private:
    using Op = Expression::Op;

    [[noreturn]] void fail(const std::string& msg) const {
        std::ostringstream os;
        os << "expression '" << src_ << "': " << msg << " at column " << pos_ + 1;
        throw ConfigError(os.str());
    }

    void skip_ws() {
        while (pos_ < src_.size() && std::isspace(static_cast<unsigned char>(src_[pos_]))) ++pos_;
    }

    bool eat(char c) {
        skip_ws();
        if (pos_ < src_.size() && src_[pos_] == c) {
            ++pos_;
            return true;
        }
        return false;
    }

    void emit(Op op, double v = 0.0) {
        out_->push_back({op, v});
        switch (op) {
            case Op::Const:
            case Op::Var:
                ++depth_;
                max_depth_ = std::max(max_depth_, depth_);
                break;
            case Op::Neg:
            case Op::Log:
            case Op::Exp:
            case Op::Sqrt:
            case Op::Abs:
                break;
            default:
                --depth_;
        }
    }

    void parse_sum() {
        parse_product();
        for (;;) {
            if (eat('+')) {
                parse_product();
                emit(Op::Add);
            } else if (eat('-')) {
                parse_product();
                emit(Op::Sub);
            } else {
                return;
            }
        }
    }

    void parse_product() {
        parse_unary();
        for (;;) {
            if (eat('*')) {
                parse_unary();
                emit(Op::Mul);
            } else if (eat('/')) {
                parse_unary();
                emit(Op::Div);
            } else {
                return;
            }
        }
    }

    void parse_unary() {
        if (eat('-')) {
            parse_unary();
            emit(Op::Neg);
        } else if (eat('+')) {
            parse_unary();
        } else {
            parse_power();
        }
    }

    void parse_power() {
        parse_primary();
        if (eat('^')) {
            parse_unary();
            emit(Op::Pow);
        }
    }

    void parse_primary() {
        skip_ws();
        if (pos_ >= src_.size()) fail("unexpected end of input");
        const char c = src_[pos_];
        if (c == '(') {
            ++pos_;
            parse_sum();
            if (!eat(')')) fail("expected ')'");
            return;
        }
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
            double v = 0.0;
            const char* first = src_.data() + pos_;
            const char* last = src_.data() + src_.size();
            auto [ptr, ec] = std::from_chars(first, last, v);
            if (ec != std::errc()) fail("bad number");
            pos_ += static_cast<std::size_t>(ptr - first);
            emit(Op::Const, v);
            return;
        }
        if (std::isalpha(static_cast<unsigned char>(c))) {
            const std::size_t start = pos_;
            while (pos_ < src_.size() &&
                   (std::isalnum(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_'))
                ++pos_;
            const std::string_view name = src_.substr(start, pos_ - start);
            if (name == "x") return emit(Op::Var);
            if (name == "pi") return emit(Op::Const, std::numbers::pi);
            if (name == "e") return emit(Op::Const, std::numbers::e);
            Op op;
            int arity = 1;
            if (name == "log" || name == "ln") op = Op::Log;
            else if (name == "exp") op = Op::Exp;
            else if (name == "sqrt") op = Op::Sqrt;
            else if (name == "abs") op = Op::Abs;
            else if (name == "min") op = Op::Min, arity = 2;
            else if (name == "max") op = Op::Max, arity = 2;
            else if (name == "pow") op = Op::Pow, arity = 2;
            else {
                pos_ = start;
                fail("unknown identifier '" + std::string(name) + "'");
            }
            if (!eat('(')) fail("expected '(' after " + std::string(name));
            parse_sum();
            for (int i = 1; i < arity; ++i) {
                if (!eat(',')) fail("expected ','");
                parse_sum();
            }
            if (!eat(')')) fail("expected ')'");
            emit(op);
            return;
        }
        fail("unexpected '" + std::string(1, c) + "'");
    }

    std::string_view src_;
    std::size_t pos_ = 0;
    std::vector<Expression::Instr>* out_ = nullptr;
    std::size_t depth_ = 0;
    std::size_t max_depth_ = 0;
};

Expression Expression::parse(std::string_view text) { return ExpressionParser(text).run(); }

double Expression::operator()(double x) const {
    // Small fixed buffer covers every realistic expression.
    constexpr std::size_t kInline = 32;
    double inline_stack[kInline];
    std::vector<double> heap;
    double* st = inline_stack;
    if (max_stack_ > kInline) {
        heap.resize(max_stack_);
        st = heap.data();
    }
    std::size_t sp = 0;
    for (const Instr& in : program_) {
        switch (in.op) {
            case Op::Const: st[sp++] = in.value; break;
            case Op::Var: st[sp++] = x; break;
            case Op::Add: --sp; st[sp - 1] += st[sp]; break;
            case Op::Sub: --sp; st[sp - 1] -= st[sp]; break;
            case Op::Mul: --sp; st[sp - 1] *= st[sp]; break;
            case Op::Div: --sp; st[sp - 1] /= st[sp]; break;
            case Op::Pow: --sp; st[sp - 1] = std::pow(st[sp - 1], st[sp]); break;
            case Op::Min: --sp; st[sp - 1] = std::min(st[sp - 1], st[sp]); break;
            case Op::Max: --sp; st[sp - 1] = std::max(st[sp - 1], st[sp]); break;
            case Op::Neg: st[sp - 1] = -st[sp - 1]; break;
            case Op::Log: st[sp - 1] = std::log(st[sp - 1]); break;
            case Op::Exp: st[sp - 1] = std::exp(st[sp - 1]); break;
            case Op::Sqrt: st[sp - 1] = std::sqrt(st[sp - 1]); break;
            case Op::Abs: st[sp - 1] = std::abs(st[sp - 1]); break;
        }
    }
    return st[0];
}

PiecewiseExpression::PiecewiseExpression(std::vector<Expression> pieces, std::vector<double> knots)
    : pieces_(std::move(pieces)), knots_(std::move(knots)) {
    if (pieces_.empty()) throw ConfigError("piecewise function needs at least one piece");
    if (pieces_.size() != knots_.size() + 1)
        throw ConfigError("piecewise function needs exactly one more piece than knots");
    for (std::size_t i = 0; i < knots_.size(); ++i) {
        if (!(knots_[i] > 0.0) || (i > 0 && !(knots_[i] > knots_[i - 1])))
            throw ConfigError("piecewise knots must be positive and strictly increasing");
    }
}

double PiecewiseExpression::operator()(double x) const {
    const auto it = std::upper_bound(knots_.begin(), knots_.end(), x);
    return pieces_[static_cast<std::size_t>(it - knots_.begin())](x);
}

std::string PiecewiseExpression::describe() const {
    if (knots_.empty()) return pieces_.front().text();
    std::ostringstream os;
    os << "piecewise{";
    for (std::size_t i = 0; i < pieces_.size(); ++i) {
        if (i) os << " | " << knots_[i - 1] << " <= x: ";
        os << pieces_[i].text();
    }
    os << "}";
    return os.str();
}

}  // namespace compforest
