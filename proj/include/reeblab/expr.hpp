#pragma once

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "reeblab/jet.hpp"

namespace reeblab {

/* Expression grammar:
 *   expr    := term (('+'|'-') term)*
 *   term    := unary (('*'|'/') unary)*
 *   unary   := '-' unary | power
 *   power   := primary ('^' unary)?          right-associative
 *   primary := NUMBER | IDENT | IDENT '(' expr ')' | '(' expr ')'
 * Functions: sin cos tan atan exp log sqrt abs.  "pi" is a builtin constant
 * unless shadowed by a coordinate or parameter.
 */

enum class NodeKind : std::uint8_t { Constant, Variable, Neg, Add, Sub, Mul, Div, Pow, Call };
enum class Func : std::uint8_t { Sin, Cos, Tan, Atan, Exp, Log, Sqrt, Abs };

struct AstNode {
    NodeKind kind;
    Func fn = Func::Sin;
    double value = 0.0;
    std::string name;       // Variable / Call
    int a = -1, b = -1;     // children
    std::size_t begin = 0, end = 0; // byte span in source
};

struct Ast {
    std::string source;
    std::vector<AstNode> nodes;
    int root = -1;

    const AstNode& node(int i) const { return nodes[static_cast<std::size_t>(i)]; }
};

Ast parse_expr(std::string_view text);

// Minimal-parenthesis printer; parse(pretty_print(a)) is structurally
// identical to a for any parsed a.
std::string pretty_print(const Ast& a);

// Equality up to spans.
bool structurally_equal(const Ast& a, const Ast& b);

// 1-based (line, column) of a byte offset.
std::pair<int, int> line_col(std::string_view text, std::size_t offset);

// Variable resolution context: coordinates bind to point slots, parameters
// and "pi" fold to constants.
struct Bindings {
    std::vector<std::string> coords;
    const std::map<std::string, double>* params = nullptr;
};

// An expression with all identifiers resolved, ready for repeated evaluation.
class BoundExpr {
  public:
    BoundExpr() = default;
    BoundExpr(std::shared_ptr<const Ast> ast, const Bindings& b);

    double value(const Vec& p) const;
    Jet2 jet(const Vec& p) const;
    // Jets of the variables may themselves carry derivatives with respect to
    // some other chart; this is exact composition.
    Jet2 jet(const std::vector<Jet2>& vars) const;

    ScalarField field() const;
    int dim() const { return dim_; }
    const Ast& ast() const { return *ast_; }

  private:
    double value_node(int i, const Vec& p) const;
    Jet2 jet_node(int i, const std::vector<Jet2>& vars) const;

    std::shared_ptr<const Ast> ast_;
    std::vector<int> slot_;     // per node: coordinate index, or -1
    std::vector<double> cval_;  // per node: folded constant when slot == -2
    int dim_ = 0;
};

// One additive term of a 1-form: coeff * d(coord), optionally divided by
// crit^m with integer m >= 1.
struct OneFormTerm {
    std::shared_ptr<const Ast> coeff; // nullptr means 1
    bool negated = false;
    std::string coord;
    int m = 0;                        // 0: smooth term
    std::shared_ptr<const Ast> denom_base; // set when m > 0
    std::size_t begin = 0, end = 0;
};

// Parses sums of `<expr> * d(<coord>)` and `<expr> * d(<coord>) / <expr>^<int>`.
// When `crit` is given, every singular denominator base must be syntactically
// equal to it (CriticalMismatchError otherwise).
std::vector<OneFormTerm> parse_oneform(std::string_view text, const Ast* crit = nullptr);

// One additive term of a 2-form: coeff * d(a)^d(b).
struct TwoFormTerm {
    std::shared_ptr<const Ast> coeff; // nullptr means 1
    bool negated = false;
    std::string coord_a, coord_b;
    std::size_t begin = 0, end = 0;
};

std::vector<TwoFormTerm> parse_twoform(std::string_view text);

// Comma-separated expression list, e.g. a CLI point "pi/2,0,pi/2".
std::vector<double> parse_point(std::string_view text,
                                const std::map<std::string, double>& params);

} // namespace reeblab
