#pragma once

// Arithmetic expressions in one variable x, e.g. "exp(-x^2) + 0.5*sin(2*pi*x)".
//
// Grammar: + - * / ^ (right-associative), unary minus, parentheses, numbers,
// the constants pi and e, and the functions sin cos tan exp log sqrt abs.

#include <memory>
#include <string>
#include <string_view>

namespace splinesel {

class Expression {
public:
    /// Parses `text`; throws ConfigError with the offending position on failure.
    explicit Expression(std::string_view text);
    ~Expression();
    Expression(Expression&&) noexcept;
    Expression& operator=(Expression&&) noexcept;

    double operator()(double x) const;

    const std::string& text() const { return text_; }

    struct Node;

private:
    std::string text_;
    std::unique_ptr<Node> root_;
};

}  // namespace splinesel
