#ifndef TABKG_EXPR_HPP
#define TABKG_EXPR_HPP

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace tabkg {

// Arithmetic expression over named columns: + - * / with parentheses,
// numeric literals, and unary minus. Unicode × and ÷ are accepted on
// input and normalized to * and /.
class Expr {
public:
    static Expr parse(const std::string& text);

    // Evaluates with a variable resolver; returns nullopt on division by
    // zero or when the resolver reports a missing value.
    std::optional<double> eval(
        const std::function<std::optional<double>(const std::string&)>& vars) const;

    const std::vector<std::string>& variables() const { return vars_; }

    // Canonical rendering; structurally equal expressions render equally.
    std::string canonical() const;

    bool structurally_equal(const Expr& other) const {
        return canonical() == other.canonical();
    }

    struct Node;

private:
    std::shared_ptr<const Node> root_;
    std::vector<std::string> vars_;
};

enum class CmpOp { Lt, Le, Gt, Ge, Eq, Ne };

// Comparison of two arithmetic expressions, e.g. "a - b > c * 86400".
class Comparison {
public:
    static Comparison parse(const std::string& text);

    std::optional<bool> eval(
        const std::function<std::optional<double>(const std::string&)>& vars) const;

    std::vector<std::string> variables() const;
    std::string canonical() const;

private:
    Expr lhs_;
    Expr rhs_;
    CmpOp op_ = CmpOp::Lt;
};

}  // namespace tabkg

#endif
