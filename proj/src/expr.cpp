#include "tabkg/expr.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <set>
#include <stdexcept>

namespace tabkg {

struct Expr::Node {
    enum class Kind { Number, Var, Add, Sub, Mul, Div, Neg } kind;
    double value = 0.0;
    std::string name;
    std::shared_ptr<const Node> lhs;
    std::shared_ptr<const Node> rhs;
};

namespace {

using NodePtr = std::shared_ptr<const Expr::Node>;

struct Parser {
    std::string text;
    std::size_t pos = 0;

    explicit Parser(const std::string& raw) {
        // Normalize unicode multiply/divide signs.
        for (std::size_t i = 0; i < raw.size();) {
            if (raw.compare(i, 2, "\xc3\x97") == 0) {  // ×
                text += '*';
                i += 2;
            } else if (raw.compare(i, 2, "\xc3\xb7") == 0) {  // ÷
                text += '/';
                i += 2;
            } else if (raw.compare(i, 3, "\xe2\x88\x92") == 0) {  // −
                text += '-';
                i += 3;
            } else {
                text += raw[i];
                ++i;
            }
        }
    }

    void skip_ws() {
        while (pos < text.size() && std::isspace((unsigned char)text[pos])) ++pos;
    }

    bool at_end() {
        skip_ws();
        return pos >= text.size();
    }

    char peek() {
        skip_ws();
        return pos < text.size() ? text[pos] : '\0';
    }

    bool consume(char c) {
        if (peek() == c) {
            ++pos;
            return true;
        }
        return false;
    }

    [[noreturn]] void fail(const std::string& what) {
        throw std::runtime_error("expression parse error at offset " +
                                 std::to_string(pos) + ": " + what + " in '" + text + "'");
    }

    NodePtr make(Expr::Node n) { return std::make_shared<Expr::Node>(std::move(n)); }

    NodePtr parse_expr() {
        NodePtr node = parse_term();
        while (true) {
            if (consume('+')) {
                node = make({Expr::Node::Kind::Add, 0, "", node, parse_term()});
            } else if (peek() == '-' ) {
                ++pos;
                node = make({Expr::Node::Kind::Sub, 0, "", node, parse_term()});
            } else {
                return node;
            }
        }
    }

    NodePtr parse_term() {
        NodePtr node = parse_factor();
        while (true) {
            if (consume('*')) {
                node = make({Expr::Node::Kind::Mul, 0, "", node, parse_factor()});
            } else if (consume('/')) {
                node = make({Expr::Node::Kind::Div, 0, "", node, parse_factor()});
            } else {
                return node;
            }
        }
    }

    NodePtr parse_factor() {
        skip_ws();
        if (consume('(')) {
            NodePtr inner = parse_expr();
            if (!consume(')')) fail("expected ')'");
            return inner;
        }
        if (consume('-')) {
            return make({Expr::Node::Kind::Neg, 0, "", parse_factor(), nullptr});
        }
        char c = peek();
        if (std::isdigit((unsigned char)c) || c == '.') {
            std::size_t start = pos;
            while (pos < text.size() &&
                   (std::isdigit((unsigned char)text[pos]) || text[pos] == '.' ||
                    text[pos] == 'e' || text[pos] == 'E' ||
                    ((text[pos] == '+' || text[pos] == '-') && pos > start &&
                     (text[pos - 1] == 'e' || text[pos - 1] == 'E'))))
                ++pos;
            double value;
            auto res = std::from_chars(text.data() + start, text.data() + pos, value);
            if (res.ec != std::errc{}) fail("bad number literal");
            return make({Expr::Node::Kind::Number, value, "", nullptr, nullptr});
        }
        if (std::isalpha((unsigned char)c) || c == '_') {
            std::size_t start = pos;
            while (pos < text.size() &&
                   (std::isalnum((unsigned char)text[pos]) || text[pos] == '_'))
                ++pos;
            return make({Expr::Node::Kind::Var, 0, text.substr(start, pos - start),
                         nullptr, nullptr});
        }
        fail("unexpected character");
    }
};

void collect_vars(const NodePtr& node, std::set<std::string>& out) {
    if (!node) return;
    if (node->kind == Expr::Node::Kind::Var) out.insert(node->name);
    collect_vars(node->lhs, out);
    collect_vars(node->rhs, out);
}

std::optional<double> eval_node(
    const NodePtr& node,
    const std::function<std::optional<double>(const std::string&)>& vars) {
    using K = Expr::Node::Kind;
    switch (node->kind) {
        case K::Number: return node->value;
        case K::Var: return vars(node->name);
        case K::Neg: {
            auto v = eval_node(node->lhs, vars);
            if (!v) return std::nullopt;
            return -*v;
        }
        default: break;
    }
    auto a = eval_node(node->lhs, vars);
    auto b = eval_node(node->rhs, vars);
    if (!a || !b) return std::nullopt;
    switch (node->kind) {
        case K::Add: return *a + *b;
        case K::Sub: return *a - *b;
        case K::Mul: return *a * *b;
        case K::Div:
            if (*b == 0.0) return std::nullopt;
            return *a / *b;
        default: return std::nullopt;
    }
}

void render_node(const NodePtr& node, std::string& out) {
    using K = Expr::Node::Kind;
    switch (node->kind) {
        case K::Number: {
            char buf[64];
            auto res = std::to_chars(buf, buf + sizeof buf, node->value);
            out.append(buf, res.ptr);
            return;
        }
        case K::Var: out += node->name; return;
        case K::Neg:
            out += "(-";
            render_node(node->lhs, out);
            out += ')';
            return;
        default: break;
    }
    out += '(';
    render_node(node->lhs, out);
    switch (node->kind) {
        case K::Add: out += " + "; break;
        case K::Sub: out += " - "; break;
        case K::Mul: out += " * "; break;
        case K::Div: out += " / "; break;
        default: break;
    }
    render_node(node->rhs, out);
    out += ')';
}

}  // namespace

Expr Expr::parse(const std::string& text) {
    Parser p(text);
    Expr e;
    e.root_ = p.parse_expr();
    if (!p.at_end()) p.fail("trailing input");
    std::set<std::string> vars;
    collect_vars(e.root_, vars);
    e.vars_.assign(vars.begin(), vars.end());
    return e;
}

std::optional<double> Expr::eval(
    const std::function<std::optional<double>(const std::string&)>& vars) const {
    auto v = eval_node(root_, vars);
    if (v && !std::isfinite(*v)) return std::nullopt;
    return v;
}

std::string Expr::canonical() const {
    std::string out;
    render_node(root_, out);
    return out;
}

Comparison Comparison::parse(const std::string& text) {
    static const struct { const char* token; CmpOp op; } ops[] = {
        {"<=", CmpOp::Le}, {">=", CmpOp::Ge}, {"==", CmpOp::Eq},
        {"!=", CmpOp::Ne}, {"<", CmpOp::Lt},  {">", CmpOp::Gt},
        {"=", CmpOp::Eq},
    };
    for (const auto& o : ops) {
        auto split = text.find(o.token);
        if (split == std::string::npos) continue;
        Comparison c;
        c.lhs_ = Expr::parse(text.substr(0, split));
        c.rhs_ = Expr::parse(text.substr(split + std::string(o.token).size()));
        c.op_ = o.op;
        return c;
    }
    throw std::runtime_error("no comparison operator in '" + text + "'");
}

std::optional<bool> Comparison::eval(
    const std::function<std::optional<double>(const std::string&)>& vars) const {
    auto a = lhs_.eval(vars);
    auto b = rhs_.eval(vars);
    if (!a || !b) return std::nullopt;
    switch (op_) {
        case CmpOp::Lt: return *a < *b;
        case CmpOp::Le: return *a <= *b;
        case CmpOp::Gt: return *a > *b;
        case CmpOp::Ge: return *a >= *b;
        case CmpOp::Eq: return *a == *b;
        case CmpOp::Ne: return *a != *b;
    }
    return std::nullopt;
}

std::vector<std::string> Comparison::variables() const {
    std::set<std::string> all(lhs_.variables().begin(), lhs_.variables().end());
    all.insert(rhs_.variables().begin(), rhs_.variables().end());
    return {all.begin(), all.end()};
}

std::string Comparison::canonical() const {
    const char* tok = "<";
    switch (op_) {
        case CmpOp::Lt: tok = "<"; break;
        case CmpOp::Le: tok = "<="; break;
        case CmpOp::Gt: tok = ">"; break;
        case CmpOp::Ge: tok = ">="; break;
        case CmpOp::Eq: tok = "=="; break;
        case CmpOp::Ne: tok = "!="; break;
    }
    return lhs_.canonical() + " " + tok + " " + rhs_.canonical();
}

}  // namespace tabkg
