#include "ccmnet/polynomial.hpp"

#include <cctype>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace ccmnet {

std::string Variable::str() const {
    std::ostringstream os;
    os << (kind == Kind::State ? 'x' : 'u') << '[' << node << "][" << component << ']';
    return os.str();
}

bool monomial_less(const Monomial& a, const Monomial& b) {
    int da = 0, db = 0;
    for (const auto& [v, e] : a) da += e;
    for (const auto& [v, e] : b) db += e;
    if (da != db) return da < db;
    return a < b;  // lex on sorted (variable, exponent) lists
}

Polynomial::Polynomial(double c) {
    if (c != 0.0) terms_[{}] = c;
}

Polynomial Polynomial::variable(const Variable& v) {
    Polynomial p;
    p.terms_[{{v, 1}}] = 1.0;
    return p;
}

Polynomial Polynomial::term(double coeff, Monomial mono) {
    Polynomial p;
    if (coeff != 0.0) p.terms_[std::move(mono)] = coeff;
    return p;
}

bool Polynomial::isConstant() const {
    return terms_.empty() || (terms_.size() == 1 && terms_.begin()->first.empty());
}

int Polynomial::totalDegree() const {
    int d = 0;
    for (const auto& [m, c] : terms_) {
        int t = 0;
        for (const auto& [v, e] : m) t += e;
        d = std::max(d, t);
    }
    return d;
}

void Polynomial::prune() {
    for (auto it = terms_.begin(); it != terms_.end();)
        it = (it->second == 0.0) ? terms_.erase(it) : std::next(it);
}

Polynomial Polynomial::operator+(const Polynomial& o) const {
    Polynomial out = *this;
    for (const auto& [m, c] : o.terms_) out.terms_[m] += c;
    out.prune();
    return out;
}

Polynomial Polynomial::operator-(const Polynomial& o) const { return *this + (-o); }

Polynomial Polynomial::operator-() const {
    Polynomial out = *this;
    for (auto& [m, c] : out.terms_) c = -c;
    return out;
}

Polynomial Polynomial::operator*(const Polynomial& o) const {
    Polynomial out;
    for (const auto& [ma, ca] : terms_) {
        for (const auto& [mb, cb] : o.terms_) {
            // merge sorted exponent lists
            Monomial m;
            size_t i = 0, j = 0;
            while (i < ma.size() || j < mb.size()) {
                if (j == mb.size() || (i < ma.size() && ma[i].first < mb[j].first))
                    m.push_back(ma[i++]);
                else if (i == ma.size() || mb[j].first < ma[i].first)
                    m.push_back(mb[j++]);
                else {
                    m.push_back({ma[i].first, ma[i].second + mb[j].second});
                    ++i, ++j;
                }
            }
            out.terms_[std::move(m)] += ca * cb;
        }
    }
    out.prune();
    return out;
}

Polynomial Polynomial::operator*(double s) const {
    Polynomial out = *this;
    for (auto& [m, c] : out.terms_) c *= s;
    out.prune();
    return out;
}

Polynomial Polynomial::pow(int e) const {
    if (e < 0) throw std::invalid_argument("polynomial: negative exponent");
    Polynomial out(1.0);
    for (int k = 0; k < e; ++k) out = out * *this;
    return out;
}

Polynomial Polynomial::diff(const Variable& v) const {
    Polynomial out;
    for (const auto& [m, c] : terms_) {
        for (size_t i = 0; i < m.size(); ++i) {
            if (!(m[i].first == v)) continue;
            Monomial dm = m;
            double coeff = c * m[i].second;
            if (dm[i].second == 1)
                dm.erase(dm.begin() + i);
            else
                --dm[i].second;
            out.terms_[std::move(dm)] += coeff;
            break;
        }
    }
    out.prune();
    return out;
}

double Polynomial::eval(const std::function<const double*(const Variable&)>& lookup) const {
    double sum = 0.0;
    for (const auto& [m, c] : terms_) {
        double t = c;
        for (const auto& [v, e] : m) {
            const double* val = lookup(v);
            if (val == nullptr)
                throw std::invalid_argument("polynomial eval: unbound variable " + v.str());
            t *= std::pow(*val, e);
        }
        sum += t;
    }
    return sum;
}

std::set<Variable> Polynomial::variables() const {
    std::set<Variable> out;
    for (const auto& [m, c] : terms_)
        for (const auto& [v, e] : m) out.insert(v);
    return out;
}

std::string Polynomial::str() const {
    if (terms_.empty()) return "0";
    std::ostringstream os;
    bool first = true;
    for (const auto& [m, c] : terms_) {
        if (!first) os << (c >= 0 ? " + " : " - ");
        else if (c < 0) os << "-";
        first = false;
        double a = std::fabs(c);
        bool wrote = false;
        if (a != 1.0 || m.empty()) {
            os << a;
            wrote = true;
        }
        for (const auto& [v, e] : m) {
            if (wrote) os << "*";
            os << v.str();
            if (e > 1) os << "^" << e;
            wrote = true;
        }
    }
    return os.str();
}

PolyMatrix::PolyMatrix(int rows, int cols)
    : rows_(rows), cols_(cols), entries_(static_cast<size_t>(rows) * cols) {
    if (rows < 0 || cols < 0) throw std::invalid_argument("PolyMatrix: negative dimension");
}

bool PolyMatrix::isSymmetric() const {
    if (rows_ != cols_) return false;
    for (int r = 0; r < rows_; ++r)
        for (int c = r + 1; c < cols_; ++c)
            if (!(at(r, c) == at(c, r))) return false;
    return true;
}

std::set<Variable> PolyMatrix::variables() const {
    std::set<Variable> out;
    for (const auto& p : entries_) {
        auto vs = p.variables();
        out.insert(vs.begin(), vs.end());
    }
    return out;
}

PolyMatrix jacobian(const PolyMatrix& F, const std::vector<Variable>& vars) {
    if (F.cols() != 1) throw std::invalid_argument("jacobian: F must be a column");
    PolyMatrix J(F.rows(), static_cast<int>(vars.size()));
    for (int r = 0; r < F.rows(); ++r)
        for (size_t k = 0; k < vars.size(); ++k)
            J.at(r, static_cast<int>(k)) = F.at(r, 0).diff(vars[k]);
    return J;
}

PolyMatrix directional_matrix_derivative(const PolyMatrix& W, const PolyMatrix& f,
                                         const std::vector<Variable>& vars) {
    if (f.cols() != 1 || f.rows() != static_cast<int>(vars.size()))
        throw std::invalid_argument("directional_matrix_derivative: dimension mismatch");
    PolyMatrix out(W.rows(), W.cols());
    for (int r = 0; r < W.rows(); ++r)
        for (int c = 0; c < W.cols(); ++c) {
            Polynomial acc;
            for (size_t k = 0; k < vars.size(); ++k)
                acc = acc + W.at(r, c).diff(vars[k]) * f.at(static_cast<int>(k), 0);
            out.at(r, c) = acc;
        }
    return out;
}

namespace {

// Recursive-descent parser for the config polynomial syntax.
class Parser {
public:
    explicit Parser(const std::string& s) : s_(s) {}

    Polynomial parse() {
        Polynomial p = expr();
        skipWs();
        if (pos_ != s_.size()) fail("trailing input");
        return p;
    }

private:
    const std::string& s_;
    size_t pos_ = 0;

    [[noreturn]] void fail(const std::string& what) {
        throw std::invalid_argument("polynomial parse error at position " +
                                    std::to_string(pos_) + ": " + what + " in \"" + s_ + "\"");
    }
    void skipWs() {
        while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
    }
    bool eat(char c) {
        skipWs();
        if (pos_ < s_.size() && s_[pos_] == c) {
            ++pos_;
            return true;
        }
        return false;
    }
    char peek() {
        skipWs();
        return pos_ < s_.size() ? s_[pos_] : '\0';
    }

    Polynomial expr() {
        Polynomial acc = term();
        for (;;) {
            if (eat('+'))
                acc = acc + term();
            else if (eat('-'))
                acc = acc - term();
            else
                return acc;
        }
    }

    Polynomial term() {
        Polynomial acc = factor();
        while (eat('*')) acc = acc * factor();
        return acc;
    }

    Polynomial factor() {
        if (eat('-')) return -factor();
        Polynomial base = primary();
        if (eat('^')) {
            int e = integer();
            return base.pow(e);
        }
        return base;
    }

    int integer() {
        skipWs();
        size_t start = pos_;
        while (pos_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[pos_]))) ++pos_;
        if (start == pos_) fail("expected integer exponent");
        return std::stoi(s_.substr(start, pos_ - start));
    }

    Polynomial primary() {
        char c = peek();
        if (c == '(') {
            eat('(');
            Polynomial p = expr();
            if (!eat(')')) fail("expected ')'");
            return p;
        }
        if (c == 'x' || c == 'u') {
            ++pos_;
            Variable v;
            v.kind = (c == 'x') ? Variable::Kind::State : Variable::Kind::Input;
            if (!eat('[')) fail("expected '[' after variable name");
            v.node = integer();
            if (!eat(']')) fail("expected ']'");
            if (!eat('[')) fail("expected second '[' in variable");
            v.component = integer();
            if (!eat(']')) fail("expected ']'");
            return Polynomial::variable(v);
        }
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
            skipWs();
            size_t start = pos_;
            while (pos_ < s_.size() &&
                   (std::isdigit(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '.' ||
                    s_[pos_] == 'e' || s_[pos_] == 'E' ||
                    ((s_[pos_] == '+' || s_[pos_] == '-') &&
                     (s_[pos_ - 1] == 'e' || s_[pos_ - 1] == 'E'))))
                ++pos_;
            return Polynomial(std::stod(s_.substr(start, pos_ - start)));
        }
        fail("expected number, variable, or '('");
    }
};

}  // namespace

Polynomial parse_polynomial(const std::string& text) { return Parser(text).parse(); }

}  // namespace ccmnet
