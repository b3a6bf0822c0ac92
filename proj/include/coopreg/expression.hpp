#pragma once

// Arithmetic expressions in z: + - * / ^, unary minus, parentheses,
// sin cos tan exp log sqrt abs cosh sinh, constants pi and e.

#include <cctype>
#include <cmath>
#include <functional>
#include <memory>
#include <numbers>
#include <string>

#include "coopreg/errors.hpp"

namespace coopreg {

class Expression {
public:
    Expression() = default;

    /// Throws ParseError naming the offending column; `allow_z` = false
    /// rejects the variable (constant expressions).
    explicit Expression(std::string source, bool allow_z = true) : source_(std::move(source)), allow_z_(allow_z) {
        pos_ = 0;
        eval_ = parse_sum();
        skip_space();
        if (pos_ != source_.size()) fail("unexpected '" + std::string(1, source_[pos_]) + "'");
    }

    [[nodiscard]] double operator()(double z) const { return eval_(z); }
    [[nodiscard]] const std::string& source() const { return source_; }
    [[nodiscard]] bool uses_z() const { return uses_z_; }

private:
    using Fn = std::function<double(double)>;

    [[noreturn]] void fail(const std::string& what) const {
        throw ParseError("expression '" + source_ + "' at column " + std::to_string(pos_ + 1) + ": " + what);
    }

    void skip_space() {
        while (pos_ < source_.size() && std::isspace(static_cast<unsigned char>(source_[pos_]))) ++pos_;
    }

    bool accept(char c) {
        skip_space();
        if (pos_ < source_.size() && source_[pos_] == c) {
            ++pos_;
            return true;
        }
        return false;
    }

    Fn parse_sum() {
        Fn lhs = parse_product();
        for (;;) {
            if (accept('+')) {
                Fn rhs = parse_product();
                lhs = [lhs, rhs](double z) { return lhs(z) + rhs(z); };
            } else if (accept('-')) {
                Fn rhs = parse_product();
                lhs = [lhs, rhs](double z) { return lhs(z) - rhs(z); };
            } else {
                return lhs;
            }
        }
    }

    Fn parse_product() {
        Fn lhs = parse_unary();
        for (;;) {
            if (accept('*')) {
                Fn rhs = parse_unary();
                lhs = [lhs, rhs](double z) { return lhs(z) * rhs(z); };
            } else if (accept('/')) {
                Fn rhs = parse_unary();
                lhs = [lhs, rhs](double z) { return lhs(z) / rhs(z); };
            } else {
                return lhs;
            }
        }
    }

    Fn parse_unary() {
        if (accept('-')) {
            Fn f = parse_unary();
            return [f](double z) { return -f(z); };
        }
        if (accept('+')) return parse_unary();
        return parse_power();
    }

    // Right-associative; -2^2 = -4.
    Fn parse_power() {
        Fn base = parse_primary();
        if (accept('^')) {
            Fn ex = parse_unary();
            return [base, ex](double z) { return std::pow(base(z), ex(z)); };
        }
        return base;
    }

    Fn parse_primary() {
        skip_space();
        if (pos_ >= source_.size()) fail("unexpected end of expression");
        const char c = source_[pos_];
        if (c == '(') {
            ++pos_;
            Fn inner = parse_sum();
            if (!accept(')')) fail("missing ')'");
            return inner;
        }
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
            const char* begin = source_.c_str() + pos_;
            char* end = nullptr;
            const double v = std::strtod(begin, &end);
            if (end == begin) fail("bad number");
            pos_ += static_cast<std::size_t>(end - begin);
            return [v](double) { return v; };
        }
        if (std::isalpha(static_cast<unsigned char>(c))) {
            const std::size_t start = pos_;
            while (pos_ < source_.size() && (std::isalnum(static_cast<unsigned char>(source_[pos_])) || source_[pos_] == '_')) {
                ++pos_;
            }
            const std::string name = source_.substr(start, pos_ - start);
            if (name == "z") {
                if (!allow_z_) {
                    pos_ = start;
                    fail("z is not allowed in a constant expression");
                }
                uses_z_ = true;
                return [](double z) { return z; };
            }
            if (name == "pi") return [](double) { return std::numbers::pi; };
            if (name == "e") return [](double) { return std::numbers::e; };
            double (*fn)(double) = nullptr;
            if (name == "sin") fn = [](double x) { return std::sin(x); };
            else if (name == "cos") fn = [](double x) { return std::cos(x); };
            else if (name == "tan") fn = [](double x) { return std::tan(x); };
            else if (name == "exp") fn = [](double x) { return std::exp(x); };
            else if (name == "log") fn = [](double x) { return std::log(x); };
            else if (name == "sqrt") fn = [](double x) { return std::sqrt(x); };
            else if (name == "abs") fn = [](double x) { return std::abs(x); };
            else if (name == "cosh") fn = [](double x) { return std::cosh(x); };
            else if (name == "sinh") fn = [](double x) { return std::sinh(x); };
            if (fn == nullptr) {
                pos_ = start;
                fail("unknown name '" + name + "'");
            }
            if (!accept('(')) fail("expected '(' after " + name);
            Fn arg = parse_sum();
            if (!accept(')')) fail("missing ')'");
            return [fn, arg](double z) { return fn(arg(z)); };
        }
        fail("unexpected '" + std::string(1, c) + "'");
    }

    std::string source_;
    bool allow_z_ = true;
    bool uses_z_ = false;
    std::size_t pos_ = 0;
    Fn eval_ = [](double) { return 0.0; };
};

/// Value of a constant expression such as "pi/2".
inline double evaluate_constant(const std::string& source) { return Expression(source, false)(0.0); }

}  // namespace coopreg
