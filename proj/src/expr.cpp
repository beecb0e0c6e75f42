#include "reeblab/expr.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>

#include "reeblab/errors.hpp"

namespace reeblab {

std::pair<int, int> line_col(std::string_view text, std::size_t offset) {
    int line = 1, col = 1;
    for (std::size_t i = 0; i < offset && i < text.size(); ++i) {
        if (text[i] == '\n') {
            ++line;
            col = 1;
        } else {
            ++col;
        }
    }
    return {line, col};
}

namespace {

enum class Tok : std::uint8_t { Number, Ident, Plus, Minus, Star, Slash, Caret, LParen, RParen, Comma, End };

struct Token {
    Tok kind;
    double num = 0.0;
    std::string_view text;
    std::size_t begin = 0, end = 0;
};

class Lexer {
  public:
    explicit Lexer(std::string_view s) : s_(s) { advance(); }

    const Token& cur() const { return cur_; }

    void advance() {
        while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
        cur_.begin = pos_;
        if (pos_ >= s_.size()) {
            cur_.kind = Tok::End;
            cur_.end = pos_;
            return;
        }
        const char c = s_[pos_];
        switch (c) {
            case '+': single(Tok::Plus); return;
            case '-': single(Tok::Minus); return;
            case '*': single(Tok::Star); return;
            case '/': single(Tok::Slash); return;
            case '^': single(Tok::Caret); return;
            case '(': single(Tok::LParen); return;
            case ')': single(Tok::RParen); return;
            case ',': single(Tok::Comma); return;
            default: break;
        }
        if (std::isdigit(static_cast<unsigned char>(c)) ||
            (c == '.' && pos_ + 1 < s_.size() && std::isdigit(static_cast<unsigned char>(s_[pos_ + 1])))) {
            lex_number();
            return;
        }
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
            std::size_t j = pos_;
            while (j < s_.size() &&
                   (std::isalnum(static_cast<unsigned char>(s_[j])) || s_[j] == '_'))
                ++j;
            cur_.kind = Tok::Ident;
            cur_.text = s_.substr(pos_, j - pos_);
            cur_.end = j;
            pos_ = j;
            return;
        }
        auto [line, col] = line_col(s_, pos_);
        throw ParseError(std::string("unexpected character '") + c + "'", line, col);
    }

    std::string_view source() const { return s_; }

  private:
    void single(Tok k) {
        cur_.kind = k;
        cur_.text = s_.substr(pos_, 1);
        cur_.end = pos_ + 1;
        ++pos_;
    }

    void lex_number() {
        std::size_t j = pos_;
        while (j < s_.size() && std::isdigit(static_cast<unsigned char>(s_[j]))) ++j;
        if (j < s_.size() && s_[j] == '.') {
            ++j;
            while (j < s_.size() && std::isdigit(static_cast<unsigned char>(s_[j]))) ++j;
        }
        if (j < s_.size() && (s_[j] == 'e' || s_[j] == 'E')) {
            std::size_t k = j + 1;
            if (k < s_.size() && (s_[k] == '+' || s_[k] == '-')) ++k;
            if (k < s_.size() && std::isdigit(static_cast<unsigned char>(s_[k]))) {
                while (k < s_.size() && std::isdigit(static_cast<unsigned char>(s_[k]))) ++k;
                j = k;
            }
        }
        cur_.kind = Tok::Number;
        cur_.text = s_.substr(pos_, j - pos_);
        cur_.num = std::strtod(std::string(cur_.text).c_str(), nullptr);
        cur_.end = j;
        pos_ = j;
    }

    std::string_view s_;
    std::size_t pos_ = 0;
    Token cur_;
};

constexpr int kMaxDepth = 512;

class Parser {
  public:
    explicit Parser(std::string_view s) : lex_(s) { ast_.source = std::string(s); }

    Ast finish_expr() {
        ast_.root = expr(0);
        expect_end();
        return std::move(ast_);
    }

    // Shared by the 1-/2-form parsers.
    Lexer& lexer() { return lex_; }
    Ast& ast() { return ast_; }

    int expr(int depth) {
        check_depth(depth);
        int lhs = term(depth + 1);
        while (lex_.cur().kind == Tok::Plus || lex_.cur().kind == Tok::Minus) {
            const bool add = lex_.cur().kind == Tok::Plus;
            lex_.advance();
            int rhs = term(depth + 1);
            lhs = make_binary(add ? NodeKind::Add : NodeKind::Sub, lhs, rhs);
        }
        return lhs;
    }

    int term(int depth) {
        check_depth(depth);
        int lhs = unary(depth + 1);
        while (lex_.cur().kind == Tok::Star || lex_.cur().kind == Tok::Slash) {
            const bool mul = lex_.cur().kind == Tok::Star;
            lex_.advance();
            int rhs = unary(depth + 1);
            lhs = make_binary(mul ? NodeKind::Mul : NodeKind::Div, lhs, rhs);
        }
        return lhs;
    }

    int unary(int depth) {
        check_depth(depth);
        if (lex_.cur().kind == Tok::Minus) {
            const std::size_t b = lex_.cur().begin;
            lex_.advance();
            int child = unary(depth + 1);
            AstNode n;
            n.kind = NodeKind::Neg;
            n.a = child;
            n.begin = b;
            n.end = ast_.node(child).end;
            return push(std::move(n));
        }
        return power(depth + 1);
    }

    int power(int depth) {
        check_depth(depth);
        int base = primary(depth + 1);
        if (lex_.cur().kind == Tok::Caret) {
            lex_.advance();
            int exponent = unary(depth + 1);
            return make_binary(NodeKind::Pow, base, exponent);
        }
        return base;
    }

    int primary(int depth) {
        check_depth(depth);
        const Token t = lex_.cur();
        if (t.kind == Tok::Number) {
            lex_.advance();
            AstNode n;
            n.kind = NodeKind::Constant;
            n.value = t.num;
            n.begin = t.begin;
            n.end = t.end;
            return push(std::move(n));
        }
        if (t.kind == Tok::Ident) {
            lex_.advance();
            if (lex_.cur().kind == Tok::LParen) {
                const Func fn = lookup_function(t);
                lex_.advance();
                int arg = expr(depth + 1);
                const std::size_t close_end = lex_.cur().end;
                expect(Tok::RParen, ")");
                AstNode n;
                n.kind = NodeKind::Call;
                n.fn = fn;
                n.name = std::string(t.text);
                n.a = arg;
                n.begin = t.begin;
                n.end = close_end;
                return push(std::move(n));
            }
            AstNode n;
            n.kind = NodeKind::Variable;
            n.name = std::string(t.text);
            n.begin = t.begin;
            n.end = t.end;
            return push(std::move(n));
        }
        if (t.kind == Tok::LParen) {
            lex_.advance();
            int inner = expr(depth + 1);
            expect(Tok::RParen, ")");
            return inner;
        }
        fail("expected expression", {"number", "identifier", "'('", "'-'"});
    }

    [[noreturn]] void fail(const std::string& msg, std::vector<std::string> expected = {}) const {
        auto [line, col] = line_col(lex_.source(), lex_.cur().begin);
        throw ParseError(msg, line, col, std::move(expected));
    }

    void expect(Tok k, const char* what) {
        if (lex_.cur().kind != k) fail(std::string("expected '") + what + "'", {what});
        lex_.advance();
    }

    void expect_end() {
        if (lex_.cur().kind != Tok::End) fail("unexpected trailing input", {"end of input"});
    }

    int push(AstNode n) {
        ast_.nodes.push_back(std::move(n));
        return static_cast<int>(ast_.nodes.size()) - 1;
    }

  private:
    int make_binary(NodeKind k, int a, int b) {
        AstNode n;
        n.kind = k;
        n.a = a;
        n.b = b;
        n.begin = ast_.node(a).begin;
        n.end = ast_.node(b).end;
        return push(std::move(n));
    }

    Func lookup_function(const Token& t) const {
        if (t.text == "sin") return Func::Sin;
        if (t.text == "cos") return Func::Cos;
        if (t.text == "tan") return Func::Tan;
        if (t.text == "atan") return Func::Atan;
        if (t.text == "exp") return Func::Exp;
        if (t.text == "log") return Func::Log;
        if (t.text == "sqrt") return Func::Sqrt;
        if (t.text == "abs") return Func::Abs;
        auto [line, col] = line_col(lex_.source(), t.begin);
        throw ParseError("unknown function '" + std::string(t.text) + "'", line, col,
                         {"sin", "cos", "tan", "atan", "exp", "log", "sqrt", "abs"});
    }

    void check_depth(int depth) const {
        if (depth > kMaxDepth) fail("expression too deeply nested");
    }

    Lexer lex_;
    Ast ast_;
};

} // namespace

Ast parse_expr(std::string_view text) {
    Parser p(text);
    return p.finish_expr();
}

namespace {

int node_prec(const Ast& a, int i) {
    switch (a.node(i).kind) {
        case NodeKind::Add:
        case NodeKind::Sub: return 1;
        case NodeKind::Mul:
        case NodeKind::Div: return 2;
        case NodeKind::Neg: return 3;
        case NodeKind::Pow: return 4;
        default: return 6;
    }
}

void print_node(const Ast& a, int i, std::string& out);

void print_child(const Ast& a, int i, int min_prec, std::string& out) {
    const bool wrap = node_prec(a, i) < min_prec;
    if (wrap) out += '(';
    print_node(a, i, out);
    if (wrap) out += ')';
}

void print_constant(double v, std::string& out) {
    char buf[40];
    if (v == static_cast<long long>(v) && std::abs(v) < 1e15) {
        std::snprintf(buf, sizeof buf, "%lld", static_cast<long long>(v));
    } else {
        std::snprintf(buf, sizeof buf, "%.17g", v);
    }
    out += buf;
}

void print_node(const Ast& a, int i, std::string& out) {
    const AstNode& n = a.node(i);
    switch (n.kind) {
        case NodeKind::Constant: print_constant(n.value, out); break;
        case NodeKind::Variable: out += n.name; break;
        case NodeKind::Neg:
            out += '-';
            print_child(a, n.a, 3, out);
            break;
        case NodeKind::Add:
            print_child(a, n.a, 1, out);
            out += '+';
            print_child(a, n.b, 2, out);
            break;
        case NodeKind::Sub:
            print_child(a, n.a, 1, out);
            out += '-';
            print_child(a, n.b, 2, out);
            break;
        case NodeKind::Mul:
            print_child(a, n.a, 2, out);
            out += '*';
            print_child(a, n.b, 3, out);
            break;
        case NodeKind::Div:
            print_child(a, n.a, 2, out);
            out += '/';
            print_child(a, n.b, 3, out);
            break;
        case NodeKind::Pow:
            print_child(a, n.a, 5, out);
            out += '^';
            print_child(a, n.b, 3, out);
            break;
        case NodeKind::Call:
            out += n.name;
            out += '(';
            print_node(a, n.a, out);
            out += ')';
            break;
    }
}

} // namespace

std::string pretty_print(const Ast& a) {
    std::string out;
    print_node(a, a.root, out);
    return out;
}

namespace {

bool equal_node(const Ast& a, int i, const Ast& b, int j) {
    const AstNode& x = a.node(i);
    const AstNode& y = b.node(j);
    if (x.kind != y.kind) return false;
    switch (x.kind) {
        case NodeKind::Constant: return x.value == y.value;
        case NodeKind::Variable: return x.name == y.name;
        case NodeKind::Neg: return equal_node(a, x.a, b, y.a);
        case NodeKind::Call: return x.fn == y.fn && equal_node(a, x.a, b, y.a);
        default: return equal_node(a, x.a, b, y.a) && equal_node(a, x.b, b, y.b);
    }
}

} // namespace

bool structurally_equal(const Ast& a, const Ast& b) {
    if (a.root < 0 || b.root < 0) return a.root == b.root;
    return equal_node(a, a.root, b, b.root);
}

// --- BoundExpr -------------------------------------------------------------

namespace {
constexpr int kSlotConstant = -2;
constexpr double kPi = 3.14159265358979323846;
} // namespace

BoundExpr::BoundExpr(std::shared_ptr<const Ast> ast, const Bindings& b)
    : ast_(std::move(ast)), dim_(static_cast<int>(b.coords.size())) {
    slot_.assign(ast_->nodes.size(), -1);
    cval_.assign(ast_->nodes.size(), 0.0);
    for (std::size_t i = 0; i < ast_->nodes.size(); ++i) {
        const AstNode& n = ast_->nodes[i];
        if (n.kind != NodeKind::Variable) continue;
        int found = -1;
        for (std::size_t c = 0; c < b.coords.size(); ++c) {
            if (b.coords[c] == n.name) {
                found = static_cast<int>(c);
                break;
            }
        }
        if (found >= 0) {
            slot_[i] = found;
            continue;
        }
        if (b.params) {
            auto it = b.params->find(n.name);
            if (it != b.params->end()) {
                slot_[i] = kSlotConstant;
                cval_[i] = it->second;
                continue;
            }
        }
        if (n.name == "pi") {
            slot_[i] = kSlotConstant;
            cval_[i] = kPi;
            continue;
        }
        auto [line, col] = line_col(ast_->source, n.begin);
        throw ValidationError("undeclared variable '" + n.name + "' at " +
                                  std::to_string(line) + ":" + std::to_string(col),
                              n.name);
    }
}

double BoundExpr::value_node(int i, const Vec& p) const {
    const AstNode& n = ast_->node(i);
    switch (n.kind) {
        case NodeKind::Constant: return n.value;
        case NodeKind::Variable:
            return slot_[static_cast<std::size_t>(i)] == kSlotConstant
                       ? cval_[static_cast<std::size_t>(i)]
                       : p[slot_[static_cast<std::size_t>(i)]];
        case NodeKind::Neg: return -value_node(n.a, p);
        case NodeKind::Add: return value_node(n.a, p) + value_node(n.b, p);
        case NodeKind::Sub: return value_node(n.a, p) - value_node(n.b, p);
        case NodeKind::Mul: return value_node(n.a, p) * value_node(n.b, p);
        case NodeKind::Div: {
            const double num = value_node(n.a, p);
            const double den = value_node(n.b, p);
            if (den == 0.0) throw DomainError("division by zero", n.begin, n.end);
            return num / den;
        }
        case NodeKind::Pow: {
            const double base = value_node(n.a, p);
            const double ex = value_node(n.b, p);
            if (ex == std::floor(ex) && std::abs(ex) < 1e15) {
                if (base == 0.0 && ex < 0.0)
                    throw DomainError("zero raised to a negative power", n.begin, n.end);
                return std::pow(base, ex);
            }
            if (base <= 0.0)
                throw DomainError("non-integer power of a non-positive base", n.begin, n.end);
            return std::pow(base, ex);
        }
        case NodeKind::Call: {
            const double x = value_node(n.a, p);
            switch (n.fn) {
                case Func::Sin: return std::sin(x);
                case Func::Cos: return std::cos(x);
                case Func::Tan: return std::tan(x);
                case Func::Atan: return std::atan(x);
                case Func::Exp: return std::exp(x);
                case Func::Log:
                    if (x <= 0.0) throw DomainError("log of non-positive value", n.begin, n.end);
                    return std::log(x);
                case Func::Sqrt:
                    if (x < 0.0) throw DomainError("sqrt of negative value", n.begin, n.end);
                    return std::sqrt(x);
                case Func::Abs: return std::abs(x);
            }
            break;
        }
    }
    throw Error("corrupt expression node");
}

Jet2 BoundExpr::jet_node(int i, const std::vector<Jet2>& vars) const {
    const AstNode& n = ast_->node(i);
    const int nd = vars.empty() ? dim_ : vars.front().dim();
    switch (n.kind) {
        case NodeKind::Constant: return Jet2::constant(n.value, nd);
        case NodeKind::Variable:
            return slot_[static_cast<std::size_t>(i)] == kSlotConstant
                       ? Jet2::constant(cval_[static_cast<std::size_t>(i)], nd)
                       : vars[static_cast<std::size_t>(slot_[static_cast<std::size_t>(i)])];
        case NodeKind::Neg: return -jet_node(n.a, vars);
        case NodeKind::Add: return jet_node(n.a, vars) + jet_node(n.b, vars);
        case NodeKind::Sub: return jet_node(n.a, vars) - jet_node(n.b, vars);
        case NodeKind::Mul: return jet_node(n.a, vars) * jet_node(n.b, vars);
        case NodeKind::Div: return div(jet_node(n.a, vars), jet_node(n.b, vars), n.begin, n.end);
        case NodeKind::Pow: return pow(jet_node(n.a, vars), jet_node(n.b, vars), n.begin, n.end);
        case NodeKind::Call: {
            Jet2 x = jet_node(n.a, vars);
            switch (n.fn) {
                case Func::Sin: return sin(x);
                case Func::Cos: return cos(x);
                case Func::Tan: return tan(x);
                case Func::Atan: return atan(x);
                case Func::Exp: return exp(x);
                case Func::Log: return log(x, n.begin, n.end);
                case Func::Sqrt: return sqrt(x, n.begin, n.end);
                case Func::Abs: return abs(x);
            }
            break;
        }
    }
    throw Error("corrupt expression node");
}

double BoundExpr::value(const Vec& p) const { return value_node(ast_->root, p); }

Jet2 BoundExpr::jet(const Vec& p) const {
    std::vector<Jet2> vars;
    vars.reserve(static_cast<std::size_t>(dim_));
    for (int i = 0; i < dim_; ++i)
        vars.push_back(Jet2::variable(p[i], i, dim_));
    return jet_node(ast_->root, vars);
}

Jet2 BoundExpr::jet(const std::vector<Jet2>& vars) const { return jet_node(ast_->root, vars); }

ScalarField BoundExpr::field() const {
    BoundExpr copy = *this;
    return [copy](const Vec& p) { return copy.jet(p); };
}

// --- 1-form and 2-form term parsing ----------------------------------------

namespace {

// Extracts the subtree rooted at `root` of `src` into a standalone Ast.
std::shared_ptr<const Ast> extract(const Ast& src, int root) {
    auto out = std::make_shared<Ast>();
    out->source = src.source;
    std::function<int(int)> copy = [&](int i) -> int {
        AstNode n = src.node(i);
        if (n.a >= 0) n.a = copy(n.a);
        if (n.b >= 0) n.b = copy(n.b);
        out->nodes.push_back(std::move(n));
        return static_cast<int>(out->nodes.size()) - 1;
    };
    out->root = copy(root);
    return out;
}

class FormParser : public Parser {
  public:
    using Parser::Parser;

    bool at_d() { return lexer().cur().kind == Tok::Ident && lexer().cur().text == "d"; }

    // Caller checked at_d().
    std::string parse_d() {
        lexer().advance();
        expect(Tok::LParen, "(");
        if (lexer().cur().kind != Tok::Ident) fail("expected coordinate name", {"identifier"});
        std::string coord(lexer().cur().text);
        lexer().advance();
        expect(Tok::RParen, ")");
        return coord;
    }
};

} // namespace

std::vector<OneFormTerm> parse_oneform(std::string_view text, const Ast* crit) {
    FormParser p(text);
    std::vector<OneFormTerm> terms;
    bool first = true;
    while (true) {
        bool neg = false;
        if (first) {
            if (p.lexer().cur().kind == Tok::Minus) {
                neg = true;
                p.lexer().advance();
            }
        } else {
            if (p.lexer().cur().kind == Tok::Plus) {
                p.lexer().advance();
            } else if (p.lexer().cur().kind == Tok::Minus) {
                neg = true;
                p.lexer().advance();
            } else if (p.lexer().cur().kind == Tok::End) {
                break;
            } else {
                p.fail("expected '+' or '-' between form terms", {"+", "-"});
            }
        }
        first = false;

        OneFormTerm t;
        t.negated = neg;
        t.begin = p.lexer().cur().begin;

        // Coefficient factors up to the d(coord) factor.
        int coeff_root = -1;
        while (!p.at_d()) {
            int factor = p.unary(0);
            if (coeff_root < 0) {
                coeff_root = factor;
            } else {
                AstNode n;
                n.kind = NodeKind::Mul;
                n.a = coeff_root;
                n.b = factor;
                n.begin = p.ast().node(coeff_root).begin;
                n.end = p.ast().node(factor).end;
                coeff_root = p.push(std::move(n));
            }
            if (p.lexer().cur().kind == Tok::Star) {
                p.lexer().advance();
            } else if (p.lexer().cur().kind == Tok::Slash) {
                // Division inside the coefficient, e.g. "sin(phi)/2*d(x)".
                p.lexer().advance();
                int rhs = p.unary(0);
                AstNode n;
                n.kind = NodeKind::Div;
                n.a = coeff_root;
                n.b = rhs;
                n.begin = p.ast().node(coeff_root).begin;
                n.end = p.ast().node(rhs).end;
                coeff_root = p.push(std::move(n));
                if (p.lexer().cur().kind == Tok::Star) p.lexer().advance();
                else p.fail("expected '*' before d(...)", {"*"});
            } else {
                p.fail("expected '*' before d(...)", {"*"});
            }
        }
        t.coord = p.parse_d();
        if (coeff_root >= 0) t.coeff = extract(p.ast(), coeff_root);

        // Optional singular denominator: / <base>^<int>.
        if (p.lexer().cur().kind == Tok::Slash) {
            p.lexer().advance();
            int base = p.primary(0);
            if (p.lexer().cur().kind != Tok::Caret)
                p.fail("singular denominator needs an explicit integer exponent", {"^"});
            p.lexer().advance();
            if (p.lexer().cur().kind != Tok::Number ||
                p.lexer().cur().num != std::floor(p.lexer().cur().num) ||
                p.lexer().cur().num < 1.0)
                p.fail("singular order must be an integer >= 1", {"integer"});
            t.m = static_cast<int>(p.lexer().cur().num);
            p.lexer().advance();
            t.denom_base = extract(p.ast(), base);
            if (crit && !structurally_equal(*t.denom_base, *crit)) {
                throw CriticalMismatchError(
                    "singular denominator '" + pretty_print(*t.denom_base) +
                    "' does not match the declared critical function '" + pretty_print(*crit) + "'");
            }
        }
        t.end = p.lexer().cur().begin;
        terms.push_back(std::move(t));
    }
    if (terms.empty()) p.fail("expected a one-form term", {"expression", "d(...)"});
    return terms;
}

std::vector<TwoFormTerm> parse_twoform(std::string_view text) {
    FormParser p(text);
    std::vector<TwoFormTerm> terms;
    bool first = true;
    while (true) {
        bool neg = false;
        if (first) {
            if (p.lexer().cur().kind == Tok::Minus) {
                neg = true;
                p.lexer().advance();
            }
        } else {
            if (p.lexer().cur().kind == Tok::Plus) {
                p.lexer().advance();
            } else if (p.lexer().cur().kind == Tok::Minus) {
                neg = true;
                p.lexer().advance();
            } else if (p.lexer().cur().kind == Tok::End) {
                break;
            } else {
                p.fail("expected '+' or '-' between form terms", {"+", "-"});
            }
        }
        first = false;

        TwoFormTerm t;
        t.negated = neg;
        t.begin = p.lexer().cur().begin;

        int coeff_root = -1;
        while (!p.at_d()) {
            int factor = p.unary(0);
            if (coeff_root < 0) {
                coeff_root = factor;
            } else {
                AstNode n;
                n.kind = NodeKind::Mul;
                n.a = coeff_root;
                n.b = factor;
                n.begin = p.ast().node(coeff_root).begin;
                n.end = p.ast().node(factor).end;
                coeff_root = p.push(std::move(n));
            }
            if (p.lexer().cur().kind == Tok::Star) {
                p.lexer().advance();
            } else if (p.lexer().cur().kind == Tok::Slash) {
                p.lexer().advance();
                int rhs = p.unary(0);
                AstNode n;
                n.kind = NodeKind::Div;
                n.a = coeff_root;
                n.b = rhs;
                n.begin = p.ast().node(coeff_root).begin;
                n.end = p.ast().node(rhs).end;
                coeff_root = p.push(std::move(n));
                if (p.lexer().cur().kind == Tok::Star) p.lexer().advance();
                else p.fail("expected '*' before d(...)", {"*"});
            } else {
                p.fail("expected '*' before d(...)", {"*"});
            }
        }
        t.coord_a = p.parse_d();
        if (p.lexer().cur().kind != Tok::Caret) p.fail("expected '^' between d(...) factors", {"^"});
        p.lexer().advance();
        if (!p.at_d()) p.fail("expected d(...) after '^'", {"d("});
        t.coord_b = p.parse_d();
        if (coeff_root >= 0) t.coeff = extract(p.ast(), coeff_root);
        t.end = p.lexer().cur().begin;
        terms.push_back(std::move(t));
    }
    if (terms.empty()) p.fail("expected a two-form term", {"expression", "d(...)"});
    return terms;
}

std::vector<double> parse_point(std::string_view text,
                                const std::map<std::string, double>& params) {
    std::vector<double> out;
    std::size_t start = 0;
    int depth = 0;
    Bindings b;
    b.params = &params;
    auto flush = [&](std::size_t end) {
        auto ast = std::make_shared<const Ast>(parse_expr(text.substr(start, end - start)));
        BoundExpr be(ast, b);
        out.push_back(be.value(Vec::Zero(0)));
    };
    for (std::size_t i = 0; i < text.size(); ++i) {
        if (text[i] == '(') ++depth;
        else if (text[i] == ')') --depth;
        else if (text[i] == ',' && depth == 0) {
            flush(i);
            start = i + 1;
        }
    }
    flush(text.size());
    return out;
}

} // namespace reeblab
