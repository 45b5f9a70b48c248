#pragma once

#include "planode/geom.hpp"

#include <map>
#include <memory>
#include <stdexcept>
#include <string>

namespace planode {

// Parse failure with byte offset into the offending source string.
class ParseError : public std::runtime_error {
public:
    ParseError(const std::string& msg, std::size_t offset)
        : std::runtime_error(msg + " at offset " + std::to_string(offset)), offset_(offset) {}
    std::size_t offset() const { return offset_; }

private:
    std::size_t offset_;
};

// Evaluation left the function's domain (sqrt of a negative, division blowup,
// non-finite result). Raised instead of letting NaN/Inf escape.
class EvalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class FieldImpl;

// Evaluatable autonomous planar vector field. Immutable after construction;
// evaluation is pure and safe to call concurrently.
class Field {
public:
    Vec2 operator()(const Vec2& p) const;

    const std::string& name() const { return name_; }
    const std::map<std::string, double>& params() const { return params_; }

    // Canonical description (name or expression sources plus parameters);
    // two fields with equal signatures evaluate identically.
    const std::string& signature() const { return signature_; }
    std::uint64_t hash() const;

    friend Field parse_field(const std::string& src_x, const std::string& src_y,
                             const std::map<std::string, double>& params);
    friend Field builtin(const std::string& name, const std::map<std::string, double>& params);

private:
    Field(std::shared_ptr<const FieldImpl> impl, std::string name,
          std::map<std::string, double> params, std::string signature);

    std::shared_ptr<const FieldImpl> impl_;
    std::string name_;
    std::map<std::string, double> params_;
    std::string signature_;
};

// Grammar:
//   expr   = term { ("+"|"-") term } ;
//   term   = factor { ("*"|"/") factor } ;
//   factor = base [ "^" number ] | "-" factor ;
//   base   = number | "x" | "y" | ident | func "(" expr ")" | "(" expr ")" ;
//   func   = "sin"|"cos"|"exp"|"tanh"|"sqrt"|"abs" ;
// Identifiers resolve against the params map; whitespace is insignificant.
Field parse_field(const std::string& src_x, const std::string& src_y,
                  const std::map<std::string, double>& params = {});

// Named test fields: center=(-y,x); vdp=(y, mu*(1-x^2)*y - x);
// stable_focus=(-x-y, x-y); saddle=(x,-y); harmonic=(y,-x).
Field builtin(const std::string& name, const std::map<std::string, double>& params = {});

inline Vec2 eval(const Field& f, const Vec2& p) { return f(p); }

}  // namespace planode
