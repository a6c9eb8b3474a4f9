#ifndef CCMNET_POLYNOMIAL_HPP
#define CCMNET_POLYNOMIAL_HPP

#include <cstdint>
#include <functional>
#include <map>
#include <set>
#include <string>
#include <vector>

namespace ccmnet {

/// One scalar coordinate of a node's state or input vector.
/// Canonically ordered by (node_index, kind, component_index); state < input
/// within a node. Indices are 1-based, matching the `x[i][k]` config syntax.
struct Variable {
    enum class Kind : std::uint8_t { State = 0, Input = 1 };
    int node = 0;
    Kind kind = Kind::State;
    int component = 0;

    auto operator<=>(const Variable&) const = default;
    std::string str() const;
};

/// Exponent multi-index: sorted (Variable, exponent>0) pairs.
using Monomial = std::vector<std::pair<Variable, int>>;

/// Compares monomials graded-lexicographically (total degree first, then lex
/// on the packed exponent vector). Drives canonical serialization order.
bool monomial_less(const Monomial& a, const Monomial& b);

struct MonomialLess {
    bool operator()(const Monomial& a, const Monomial& b) const { return monomial_less(a, b); }
};

/// Sparse multivariate polynomial with double coefficients. Immutable value
/// semantics; zero-coefficient terms are never stored.
class Polynomial {
public:
    using TermMap = std::map<Monomial, double, MonomialLess>;

    Polynomial() = default;
    explicit Polynomial(double c);
    static Polynomial variable(const Variable& v);
    static Polynomial term(double coeff, Monomial mono);

    const TermMap& terms() const { return terms_; }
    bool isZero() const { return terms_.empty(); }
    bool isConstant() const;
    int totalDegree() const;

    Polynomial operator+(const Polynomial& o) const;
    Polynomial operator-(const Polynomial& o) const;
    Polynomial operator-() const;
    Polynomial operator*(const Polynomial& o) const;
    Polynomial operator*(double s) const;
    Polynomial pow(int e) const;

    /// Formal partial derivative.
    Polynomial diff(const Variable& v) const;

    /// Evaluates at a point; throws std::invalid_argument naming the first
    /// unbound variable.
    double eval(const std::function<const double*(const Variable&)>& lookup) const;

    std::set<Variable> variables() const;

    bool operator==(const Polynomial& o) const { return terms_ == o.terms_; }

    std::string str() const;

private:
    TermMap terms_;
    void prune();
};

inline Polynomial operator*(double s, const Polynomial& p) { return p * s; }

/// Dense rectangular matrix of polynomials.
class PolyMatrix {
public:
    PolyMatrix() = default;
    PolyMatrix(int rows, int cols);

    int rows() const { return rows_; }
    int cols() const { return cols_; }
    Polynomial& at(int r, int c) { return entries_[r * cols_ + c]; }
    const Polynomial& at(int r, int c) const { return entries_[r * cols_ + c]; }

    bool isSymmetric() const;
    std::set<Variable> variables() const;

private:
    int rows_ = 0, cols_ = 0;
    std::vector<Polynomial> entries_;
};

/// Jacobian of a column matrix F with respect to an ordered variable list.
PolyMatrix jacobian(const PolyMatrix& F, const std::vector<Variable>& vars);

/// The directional derivative sum_k (dW_ij/dvars_k) * f_k, entrywise. W must
/// be symmetric and f a column of height |vars|.
PolyMatrix directional_matrix_derivative(const PolyMatrix& W, const PolyMatrix& f,
                                         const std::vector<Variable>& vars);

/// Parses the config polynomial syntax: variables `x[i][k]` / `u[i][k]`,
/// operators + - * ^, parentheses, numeric literals.
Polynomial parse_polynomial(const std::string& text);

}  // namespace ccmnet

#endif
