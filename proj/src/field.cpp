#include "planode/field.hpp"

#include <array>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <memory>
#include <sstream>
#include <vector>

namespace planode {

namespace {

enum class Fn { Sin, Cos, Exp, Tanh, Sqrt, Abs };

const std::array<std::pair<const char*, Fn>, 6> kFunctions = {{
    {"sin", Fn::Sin},
    {"cos", Fn::Cos},
    {"exp", Fn::Exp},
    {"tanh", Fn::Tanh},
    {"sqrt", Fn::Sqrt},
    {"abs", Fn::Abs},
}};

struct Node {
    enum class Kind { Const, VarX, VarY, Neg, Add, Sub, Mul, Div, Pow, Func } kind;
    double value = 0.0;  // Const payload or Pow exponent
    Fn fn = Fn::Sin;
    std::unique_ptr<Node> a, b;
};

double eval_node(const Node& n, double x, double y) {
    switch (n.kind) {
        case Node::Kind::Const: return n.value;
        case Node::Kind::VarX: return x;
        case Node::Kind::VarY: return y;
        case Node::Kind::Neg: return -eval_node(*n.a, x, y);
        case Node::Kind::Add: return eval_node(*n.a, x, y) + eval_node(*n.b, x, y);
        case Node::Kind::Sub: return eval_node(*n.a, x, y) - eval_node(*n.b, x, y);
        case Node::Kind::Mul: return eval_node(*n.a, x, y) * eval_node(*n.b, x, y);
        case Node::Kind::Div: return eval_node(*n.a, x, y) / eval_node(*n.b, x, y);
        case Node::Kind::Pow: {
            const double base = eval_node(*n.a, x, y);
            if (base < 0.0 && n.value != std::floor(n.value))
                throw EvalError("negative base with non-integer exponent");
            return std::pow(base, n.value);
        }
        case Node::Kind::Func: {
            const double v = eval_node(*n.a, x, y);
            switch (n.fn) {
                case Fn::Sin: return std::sin(v);
                case Fn::Cos: return std::cos(v);
                case Fn::Exp: return std::exp(v);
                case Fn::Tanh: return std::tanh(v);
                case Fn::Sqrt:
                    if (v < 0.0) throw EvalError("sqrt of negative value");
                    return std::sqrt(v);
                case Fn::Abs: return std::abs(v);
            }
        }
    }
    throw EvalError("corrupt expression tree");
}

class Parser {
public:
    Parser(const std::string& src, const std::map<std::string, double>& params)
        : src_(src), params_(params) {}

    std::unique_ptr<Node> parse() {
        auto e = expr();
        skip_ws();
        if (pos_ != src_.size()) fail("unexpected trailing input");
        return e;
    }

private:
    [[noreturn]] void fail(const std::string& msg) const { throw ParseError(msg, pos_); }

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

    char peek() {
        skip_ws();
        return pos_ < src_.size() ? src_[pos_] : '\0';
    }

    std::unique_ptr<Node> expr() {
        auto lhs = term();
        for (;;) {
            if (eat('+')) {
                auto n = std::make_unique<Node>();
                n->kind = Node::Kind::Add;
                n->a = std::move(lhs);
                n->b = term();
                lhs = std::move(n);
            } else if (eat('-')) {
                auto n = std::make_unique<Node>();
                n->kind = Node::Kind::Sub;
                n->a = std::move(lhs);
                n->b = term();
                lhs = std::move(n);
            } else {
                return lhs;
            }
        }
    }

    std::unique_ptr<Node> term() {
        auto lhs = factor();
        for (;;) {
            if (eat('*')) {
                auto n = std::make_unique<Node>();
                n->kind = Node::Kind::Mul;
                n->a = std::move(lhs);
                n->b = factor();
                lhs = std::move(n);
            } else if (eat('/')) {
                auto n = std::make_unique<Node>();
                n->kind = Node::Kind::Div;
                n->a = std::move(lhs);
                n->b = factor();
                lhs = std::move(n);
            } else {
                return lhs;
            }
        }
    }

    std::unique_ptr<Node> factor() {
        if (eat('-')) {
            auto n = std::make_unique<Node>();
            n->kind = Node::Kind::Neg;
            n->a = factor();
            return n;
        }
        auto b = base();
        if (eat('^')) {
            skip_ws();
            auto n = std::make_unique<Node>();
            n->kind = Node::Kind::Pow;
            n->a = std::move(b);
            n->value = number("expected constant exponent after '^'");
            return n;
        }
        return b;
    }

    std::unique_ptr<Node> base() {
        skip_ws();
        if (pos_ >= src_.size()) fail("expected expression");
        const char c = src_[pos_];
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
            auto n = std::make_unique<Node>();
            n->kind = Node::Kind::Const;
            n->value = number("malformed number");
            return n;
        }
        if (c == '(') {
            ++pos_;
            auto e = expr();
            if (!eat(')')) fail("expected ')'");
            return e;
        }
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') return ident();
        fail(std::string("unexpected character '") + c + "'");
    }

    std::unique_ptr<Node> ident() {
        const std::size_t start = pos_;
        while (pos_ < src_.size() &&
               (std::isalnum(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_'))
            ++pos_;
        const std::string name = src_.substr(start, pos_ - start);

        auto n = std::make_unique<Node>();
        if (name == "x") {
            n->kind = Node::Kind::VarX;
            return n;
        }
        if (name == "y") {
            n->kind = Node::Kind::VarY;
            return n;
        }
        for (const auto& [fname, fn] : kFunctions) {
            if (name == fname) {
                if (!eat('(')) fail("expected '(' after function name");
                n->kind = Node::Kind::Func;
                n->fn = fn;
                n->a = expr();
                if (!eat(')')) fail("expected ')'");
                return n;
            }
        }
        const auto it = params_.find(name);
        if (it == params_.end()) {
            pos_ = start;
            fail("unknown identifier '" + name + "'");
        }
        n->kind = Node::Kind::Const;
        n->value = it->second;  // parameters bind at parse time
        return n;
    }

    double number(const char* err) {
        skip_ws();
        const std::size_t start = pos_;
        while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) ++pos_;
        if (pos_ < src_.size() && src_[pos_] == '.') {
            ++pos_;
            while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) ++pos_;
        }
        if (pos_ == start || (pos_ == start + 1 && src_[start] == '.')) {
            pos_ = start;
            fail(err);
        }
        if (pos_ < src_.size() && (src_[pos_] == 'e' || src_[pos_] == 'E')) {
            std::size_t e = pos_ + 1;
            if (e < src_.size() && (src_[e] == '+' || src_[e] == '-')) ++e;
            std::size_t d = e;
            while (d < src_.size() && std::isdigit(static_cast<unsigned char>(src_[d]))) ++d;
            if (d > e) pos_ = d;
        }
        double v = 0.0;
        const auto res = std::from_chars(src_.data() + start, src_.data() + pos_, v);
        if (res.ec != std::errc()) {
            pos_ = start;
            fail(err);
        }
        return v;
    }

    const std::string& src_;
    const std::map<std::string, double>& params_;
    std::size_t pos_ = 0;
};

std::string format_params(const std::map<std::string, double>& params) {
    std::ostringstream os;
    for (const auto& [k, v] : params) {
        os << ';' << k << '=';
        char buf[40];
        std::snprintf(buf, sizeof(buf), "%.17g", v);
        os << buf;
    }
    return os.str();
}

}  // namespace

class FieldImpl {
public:
    virtual ~FieldImpl() = default;
    virtual Vec2 eval(const Vec2& p) const = 0;
};

namespace {

class ExprField final : public FieldImpl {
public:
    ExprField(std::unique_ptr<Node> fx, std::unique_ptr<Node> fy)
        : fx_(std::move(fx)), fy_(std::move(fy)) {}

    Vec2 eval(const Vec2& p) const override {
        return Vec2(eval_node(*fx_, p.x(), p.y()), eval_node(*fy_, p.x(), p.y()));
    }

private:
    std::unique_ptr<Node> fx_, fy_;
};

class NativeField final : public FieldImpl {
public:
    explicit NativeField(Vec2 (*fn)(const Vec2&, double), double mu = 0.0) : fn_(fn), mu_(mu) {}
    Vec2 eval(const Vec2& p) const override { return fn_(p, mu_); }

private:
    Vec2 (*fn_)(const Vec2&, double);
    double mu_;
};

Vec2 f_center(const Vec2& p, double) { return Vec2(-p.y(), p.x()); }
Vec2 f_vdp(const Vec2& p, double mu) {
    return Vec2(p.y(), mu * (1.0 - p.x() * p.x()) * p.y() - p.x());
}
Vec2 f_stable_focus(const Vec2& p, double) { return Vec2(-p.x() - p.y(), p.x() - p.y()); }
Vec2 f_saddle(const Vec2& p, double) { return Vec2(p.x(), -p.y()); }
Vec2 f_harmonic(const Vec2& p, double) { return Vec2(p.y(), -p.x()); }

}  // namespace

Field::Field(std::shared_ptr<const FieldImpl> impl, std::string name,
             std::map<std::string, double> params, std::string signature)
    : impl_(std::move(impl)),
      name_(std::move(name)),
      params_(std::move(params)),
      signature_(std::move(signature)) {}

Vec2 Field::operator()(const Vec2& p) const {
    if (!p.allFinite()) throw EvalError("field evaluated at non-finite point");
    const Vec2 v = impl_->eval(p);
    if (!v.allFinite()) {
        std::ostringstream os;
        os << "field '" << name_ << "' non-finite at (" << p.x() << ", " << p.y() << ")";
        throw EvalError(os.str());
    }
    return v;
}

std::uint64_t Field::hash() const {
    std::uint64_t h = 1469598103934665603ull;  // FNV-1a
    for (unsigned char c : signature_) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

Field parse_field(const std::string& src_x, const std::string& src_y,
                  const std::map<std::string, double>& params) {
    for (const auto& [k, v] : params) {
        (void)v;
        if (k == "x" || k == "y") throw std::invalid_argument("parameter may not shadow x or y");
        for (const auto& [fname, fn] : kFunctions) {
            (void)fn;
            if (k == fname) throw std::invalid_argument("parameter may not shadow a function name");
        }
    }
    auto fx = Parser(src_x, params).parse();
    auto fy = Parser(src_y, params).parse();
    std::string sig = "expr:fx=" + src_x + ";fy=" + src_y + format_params(params);
    return Field(std::make_shared<ExprField>(std::move(fx), std::move(fy)), "expr", params,
                 std::move(sig));
}

Field builtin(const std::string& name, const std::map<std::string, double>& params) {
    std::map<std::string, double> p = params;
    std::shared_ptr<const FieldImpl> impl;
    if (name == "center") {
        impl = std::make_shared<NativeField>(&f_center);
    } else if (name == "vdp") {
        if (!p.count("mu")) p["mu"] = 1.0;
        impl = std::make_shared<NativeField>(&f_vdp, p.at("mu"));
    } else if (name == "stable_focus") {
        impl = std::make_shared<NativeField>(&f_stable_focus);
    } else if (name == "saddle") {
        impl = std::make_shared<NativeField>(&f_saddle);
    } else if (name == "harmonic") {
        impl = std::make_shared<NativeField>(&f_harmonic);
    } else {
        throw std::invalid_argument("unknown builtin field '" + name + "'");
    }
    std::string sig = "builtin:" + name + format_params(p);
    return Field(std::move(impl), name, std::move(p), std::move(sig));
}

}  // namespace planode
