#include "splinesel/expression.hpp"

#include <cctype>
#include <cmath>
#include <cstdlib>
#include <numbers>
#include <vector>

#include "splinesel/error.hpp"

namespace splinesel {

struct Expression::Node {
    enum class Kind { number, variable, negate, add, sub, mul, div, pow, call } kind;
    double value = 0.0;
    double (*fn)(double) = nullptr;
    std::unique_ptr<Node> lhs, rhs;

    double eval(double x) const {
        switch (kind) {
            case Kind::number: return value;
            case Kind::variable: return x;
            case Kind::negate: return -lhs->eval(x);
            case Kind::add: return lhs->eval(x) + rhs->eval(x);
            case Kind::sub: return lhs->eval(x) - rhs->eval(x);
            case Kind::mul: return lhs->eval(x) * rhs->eval(x);
            case Kind::div: return lhs->eval(x) / rhs->eval(x);
            case Kind::pow: return std::pow(lhs->eval(x), rhs->eval(x));
            case Kind::call: return fn(lhs->eval(x));
        }
        return 0.0;
    }
};

namespace {

using Node = Expression::Node;
using NodePtr = std::unique_ptr<Node>;

NodePtr leaf(Node::Kind kind, double value = 0.0) {
    auto n = std::make_unique<Node>();
    n->kind = kind;
    n->value = value;
    return n;
}

NodePtr branch(Node::Kind kind, NodePtr lhs, NodePtr rhs = nullptr) {
    auto n = std::make_unique<Node>();
    n->kind = kind;
    n->lhs = std::move(lhs);
    n->rhs = std::move(rhs);
    return n;
}

struct Function {
    const char* name;
    double (*fn)(double);
};

const Function kFunctions[] = {
    {"sin", [](double v) { return std::sin(v); }},   {"cos", [](double v) { return std::cos(v); }},
    {"tan", [](double v) { return std::tan(v); }},   {"exp", [](double v) { return std::exp(v); }},
    {"log", [](double v) { return std::log(v); }},   {"sqrt", [](double v) { return std::sqrt(v); }},
    {"abs", [](double v) { return std::abs(v); }},
};

class Parser {
public:
    explicit Parser(std::string_view text) : s_(text) {}

    NodePtr parse() {
        NodePtr e = expression();
        skip();
        if (pos_ != s_.size()) fail("unexpected character");
        return e;
    }

private:
    [[noreturn]] void fail(const std::string& what) const {
        throw ConfigError("expression '" + std::string(s_) + "': " + what + " at position " + std::to_string(pos_));
    }

    void skip() {
        while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
    }

    bool accept(char ch) {
        skip();
        if (pos_ < s_.size() && s_[pos_] == ch) {
            ++pos_;
            return true;
        }
        return false;
    }

    NodePtr expression() {
        NodePtr lhs = term();
        for (;;) {
            if (accept('+'))
                lhs = branch(Node::Kind::add, std::move(lhs), term());
            else if (accept('-'))
                lhs = branch(Node::Kind::sub, std::move(lhs), term());
            else
                return lhs;
        }
    }

    NodePtr term() {
        NodePtr lhs = unary();
        for (;;) {
            if (accept('*'))
                lhs = branch(Node::Kind::mul, std::move(lhs), unary());
            else if (accept('/'))
                lhs = branch(Node::Kind::div, std::move(lhs), unary());
            else
                return lhs;
        }
    }

    NodePtr unary() {
        if (accept('-')) return branch(Node::Kind::negate, unary());
        if (accept('+')) return unary();
        return power();
    }

    NodePtr power() {
        NodePtr base = primary();
        if (accept('^')) return branch(Node::Kind::pow, std::move(base), unary());
        return base;
    }

    NodePtr primary() {
        skip();
        if (pos_ >= s_.size()) fail("unexpected end of input");
        if (accept('(')) {
            NodePtr inner = expression();
            if (!accept(')')) fail("expected ')'");
            return inner;
        }
        const char ch = s_[pos_];
        if (std::isdigit(static_cast<unsigned char>(ch)) || ch == '.') {
            const std::string rest(s_.substr(pos_));
            char* end = nullptr;
            const double v = std::strtod(rest.c_str(), &end);
            if (end == rest.c_str()) fail("malformed number");
            pos_ += static_cast<std::size_t>(end - rest.c_str());
            return leaf(Node::Kind::number, v);
        }
        if (std::isalpha(static_cast<unsigned char>(ch))) {
            const std::size_t start = pos_;
            while (pos_ < s_.size() && std::isalnum(static_cast<unsigned char>(s_[pos_]))) ++pos_;
            const std::string_view name = s_.substr(start, pos_ - start);
            if (name == "x") return leaf(Node::Kind::variable);
            if (name == "pi") return leaf(Node::Kind::number, std::numbers::pi);
            if (name == "e") return leaf(Node::Kind::number, std::numbers::e);
            for (const Function& f : kFunctions) {
                if (name == f.name) {
                    if (!accept('(')) fail("expected '(' after " + std::string(name));
                    NodePtr arg = expression();
                    if (!accept(')')) fail("expected ')'");
                    NodePtr call = branch(Node::Kind::call, std::move(arg));
                    call->fn = f.fn;
                    return call;
                }
            }
            pos_ = start;
            fail("unknown identifier '" + std::string(name) + "'");
        }
        fail("unexpected character");
    }

    std::string_view s_;
    std::size_t pos_ = 0;
};

}  // namespace

Expression::Expression(std::string_view text) : text_(text), root_(Parser(text).parse()) {}
Expression::~Expression() = default;
Expression::Expression(Expression&&) noexcept = default;
Expression& Expression::operator=(Expression&&) noexcept = default;

double Expression::operator()(double x) const { return root_->eval(x); }

}  // namespace splinesel
