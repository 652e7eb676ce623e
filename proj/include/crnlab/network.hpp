#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <cstdlib>
#include <map>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "crnlab/errors.hpp"
#include "crnlab/numeric.hpp"

namespace crnlab {

/// One chemical species. Diffusion constants are not part of the network
/// text; they are supplied separately and default to 1.
struct Species {
    std::string name;
    int index = 0;
    double diffusion = 1.0;  // length^2 / time, >= 0
};

/// A reversible reaction  alpha -> beta  /  beta -> alpha  with mass-action
/// rate constants k_fwd, k_bwd > 0. alpha and beta are stoichiometric
/// coefficient vectors over the network's species (the two complexes).
struct ReversiblePair {
    std::vector<int> alpha;
    std::vector<int> beta;
    double k_fwd = 1.0;
    double k_bwd = 1.0;
};

/// The index sets of a reversible pair: L collects species consumed on net
/// (alpha_i > beta_i), R species produced on net (alpha_j < beta_j), L0/R0
/// the supports of the two complexes, and gamma_i = min(alpha_i, beta_i).
struct IndexSets {
    std::vector<int> left;           // L
    std::vector<int> right;          // R
    std::vector<int> left_support;   // L0 = { i : alpha_i != 0 }
    std::vector<int> right_support;  // R0 = { j : beta_j != 0 }
    std::vector<int> gamma;
};

inline IndexSets index_sets(const ReversiblePair& pair) {
    IndexSets sets;
    const int n = static_cast<int>(pair.alpha.size());
    sets.gamma.resize(n);
    for (int i = 0; i < n; ++i) {
        sets.gamma[i] = std::min(pair.alpha[i], pair.beta[i]);
        if (pair.alpha[i] > pair.beta[i]) sets.left.push_back(i);
        if (pair.alpha[i] < pair.beta[i]) sets.right.push_back(i);
        if (pair.alpha[i] != 0) sets.left_support.push_back(i);
        if (pair.beta[i] != 0) sets.right_support.push_back(i);
    }
    return sets;
}

/// A reversible mass-action network: an ordered species list plus one or
/// more reversible pairs. Immutable after construction; all operations on
/// it are pure functions.
class ReactionNetwork {
public:
    ReactionNetwork(std::vector<Species> species, std::vector<ReversiblePair> pairs)
        : species_(std::move(species)), pairs_(std::move(pairs)) {
        if (pairs_.empty()) throw ValidationError("network", "at least one reaction required");
        for (const auto& p : pairs_) {
            if (p.alpha.size() != species_.size() || p.beta.size() != species_.size())
                throw ValidationError("network", "complex vector length != species count");
            if (p.alpha == p.beta)
                throw ValidationError("network", "degenerate reaction: alpha == beta");
            auto empty = [](const std::vector<int>& y) {
                return std::all_of(y.begin(), y.end(), [](int c) { return c == 0; });
            };
            if (empty(p.alpha) || empty(p.beta))
                throw ValidationError("network", "complexes must contain at least one species");
            if (!(p.k_fwd > 0.0) || !(p.k_bwd > 0.0))
                throw ValidationError("network", "rate constants must be positive");
        }
        for (const auto& s : species_) {
            if (s.diffusion < 0.0)
                throw ValidationError("diffusion." + s.name, "must be nonnegative");
        }
    }

    const std::vector<Species>& species() const { return species_; }
    const std::vector<ReversiblePair>& pairs() const { return pairs_; }
    int species_count() const { return static_cast<int>(species_.size()); }

    int species_index(std::string_view name) const {
        for (const auto& s : species_)
            if (s.name == name) return s.index;
        return -1;
    }

    void set_diffusion(int index, double d) {
        if (d < 0.0)
            throw ValidationError("diffusion." + species_[index].name, "must be nonnegative");
        species_[static_cast<std::size_t>(index)].diffusion = d;
    }

    std::vector<double> diffusions() const {
        std::vector<double> d;
        d.reserve(species_.size());
        for (const auto& s : species_) d.push_back(s.diffusion);
        return d;
    }

    /// True when the network is a single reversible pair (the setting of the
    /// equilibria and analysis machinery).
    bool single_pair() const { return pairs_.size() == 1; }

private:
    std::vector<Species> species_;
    std::vector<ReversiblePair> pairs_;
};

namespace detail {

inline double clamped(double x) { return x < 0.0 ? 0.0 : x; }

/// u^y over the clamped state, with 0^0 == 1.
inline double monomial(std::span<const double> u, const std::vector<int>& y) {
    double acc = 1.0;
    for (std::size_t i = 0; i < y.size(); ++i) acc *= ipow(clamped(u[i]), y[i]);
    return acc;
}

/// d(u^y)/du_j. Identically zero when y_j == 0, even at u_j == 0.
inline double monomial_derivative(std::span<const double> u, const std::vector<int>& y, int j) {
    if (y[static_cast<std::size_t>(j)] == 0) return 0.0;
    double acc = static_cast<double>(y[static_cast<std::size_t>(j)]);
    for (std::size_t i = 0; i < y.size(); ++i) {
        const int e = (static_cast<int>(i) == j) ? y[i] - 1 : y[i];
        acc *= ipow(clamped(u[i]), e);
    }
    return acc;
}

}  // namespace detail

/// Net production rate of the pair: k_fwd u^alpha - k_bwd u^beta.
inline double pair_flux(const ReversiblePair& pair, std::span<const double> u) {
    return pair.k_fwd * detail::monomial(u, pair.alpha) -
           pair.k_bwd * detail::monomial(u, pair.beta);
}

/// No-allocation kernel: out = R(u). Both spans must have species length.
inline void mass_action_rate_into(const ReactionNetwork& net, std::span<const double> u,
                                  std::span<double> out) {
    for (auto& v : out) v = 0.0;
    for (const auto& pair : net.pairs()) {
        const double flux = pair_flux(pair, u);
        for (std::size_t i = 0; i < u.size(); ++i)
            out[i] += flux * static_cast<double>(pair.beta[i] - pair.alpha[i]);
    }
}

/// Mass-action rate R(u) = sum over pairs of [k_fwd u^alpha - k_bwd u^beta](beta - alpha).
/// Entries of u within a small negative tolerance are clamped to zero for
/// monomial evaluation.
inline std::vector<double> mass_action_rate(const ReactionNetwork& net,
                                            std::span<const double> u) {
    if (static_cast<int>(u.size()) != net.species_count())
        throw ValidationError("u", "dimension mismatch with species count");
    std::vector<double> rate(u.size(), 0.0);
    mass_action_rate_into(net, u, rate);
    return rate;
}

/// Analytic Jacobian of R at u; entry (i, j) = dR_i/du_j.
inline Eigen::MatrixXd rate_jacobian(const ReactionNetwork& net, std::span<const double> u) {
    if (static_cast<int>(u.size()) != net.species_count())
        throw ValidationError("u", "dimension mismatch with species count");
    const int n = net.species_count();
    Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(n, n);
    for (const auto& pair : net.pairs()) {
        for (int j = 0; j < n; ++j) {
            const double dflux = pair.k_fwd * detail::monomial_derivative(u, pair.alpha, j) -
                                 pair.k_bwd * detail::monomial_derivative(u, pair.beta, j);
            if (dflux == 0.0) continue;
            for (int i = 0; i < n; ++i)
                jac(i, j) += dflux * static_cast<double>(pair.beta[static_cast<std::size_t>(i)] -
                                                         pair.alpha[static_cast<std::size_t>(i)]);
        }
    }
    return jac;
}

// ---------------------------------------------------------------------------
// Conservation laws: integer left null space of the stoichiometric matrix.
// ---------------------------------------------------------------------------

namespace detail {

/// Exact rational scalar for the small row reductions below. Stoichiometric
/// coefficients are tiny integers, so int64 never overflows here.
struct Rational {
    std::int64_t num = 0;
    std::int64_t den = 1;

    Rational() = default;
    Rational(std::int64_t n) : num(n), den(1) {}
    Rational(std::int64_t n, std::int64_t d) : num(n), den(d) { normalize(); }

    void normalize() {
        if (den < 0) {
            num = -num;
            den = -den;
        }
        const std::int64_t g = std::gcd(std::abs(num), den);
        if (g > 1) {
            num /= g;
            den /= g;
        }
        if (num == 0) den = 1;
    }

    bool zero() const { return num == 0; }
    Rational operator+(const Rational& o) const { return {num * o.den + o.num * den, den * o.den}; }
    Rational operator-(const Rational& o) const { return {num * o.den - o.num * den, den * o.den}; }
    Rational operator*(const Rational& o) const { return {num * o.num, den * o.den}; }
    Rational operator/(const Rational& o) const { return {num * o.den, den * o.num}; }
};

using RatMatrix = std::vector<std::vector<Rational>>;

/// In-place Gauss-Jordan to reduced row echelon form; returns pivot columns.
inline std::vector<int> rref(RatMatrix& m) {
    std::vector<int> pivots;
    if (m.empty()) return pivots;
    const int rows = static_cast<int>(m.size());
    const int cols = static_cast<int>(m[0].size());
    int row = 0;
    for (int col = 0; col < cols && row < rows; ++col) {
        int pivot = -1;
        for (int r = row; r < rows; ++r) {
            if (!m[static_cast<std::size_t>(r)][static_cast<std::size_t>(col)].zero()) {
                pivot = r;
                break;
            }
        }
        if (pivot < 0) continue;
        std::swap(m[static_cast<std::size_t>(row)], m[static_cast<std::size_t>(pivot)]);
        const Rational inv = Rational(1) / m[static_cast<std::size_t>(row)][static_cast<std::size_t>(col)];
        for (auto& x : m[static_cast<std::size_t>(row)]) x = x * inv;
        for (int r = 0; r < rows; ++r) {
            if (r == row) continue;
            const Rational factor = m[static_cast<std::size_t>(r)][static_cast<std::size_t>(col)];
            if (factor.zero()) continue;
            for (int c = 0; c < cols; ++c) {
                auto& dst = m[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)];
                dst = dst - factor * m[static_cast<std::size_t>(row)][static_cast<std::size_t>(c)];
            }
        }
        pivots.push_back(col);
        ++row;
    }
    m.resize(static_cast<std::size_t>(row), std::vector<Rational>());  // drop zero rows
    return pivots;
}

/// Scale a rational row to a primitive integer row with positive leading entry.
inline std::vector<std::int64_t> primitive_integer_row(const std::vector<Rational>& row) {
    std::int64_t lcm = 1;
    for (const auto& x : row) lcm = std::lcm(lcm, x.den);
    std::vector<std::int64_t> out;
    out.reserve(row.size());
    for (const auto& x : row) out.push_back(x.num * (lcm / x.den));
    std::int64_t g = 0;
    for (auto v : out) g = std::gcd(g, std::abs(v));
    if (g > 1)
        for (auto& v : out) v /= g;
    for (auto v : out) {
        if (v != 0) {
            if (v < 0)
                for (auto& w : out) w = -w;
            break;
        }
    }
    return out;
}

}  // namespace detail

/// Basis of the left null space of the stoichiometric matrix (columns are
/// beta - alpha per pair), in canonical integer reduced-echelon form with
/// positive leading entries. Each row w is a conservation law:
/// w . R(u) == 0 for every u. Empty matrix when no law exists.
inline Eigen::MatrixXi conservation_basis(const ReactionNetwork& net) {
    const int n = net.species_count();
    const int p = static_cast<int>(net.pairs().size());

    // Rows of st are the transposed stoichiometric vectors.
    detail::RatMatrix st(static_cast<std::size_t>(p),
                         std::vector<detail::Rational>(static_cast<std::size_t>(n)));
    for (int q = 0; q < p; ++q)
        for (int i = 0; i < n; ++i)
            st[static_cast<std::size_t>(q)][static_cast<std::size_t>(i)] =
                detail::Rational(net.pairs()[static_cast<std::size_t>(q)].beta[static_cast<std::size_t>(i)] -
                                 net.pairs()[static_cast<std::size_t>(q)].alpha[static_cast<std::size_t>(i)]);

    const std::vector<int> pivots = detail::rref(st);
    std::vector<bool> is_pivot(static_cast<std::size_t>(n), false);
    for (int c : pivots) is_pivot[static_cast<std::size_t>(c)] = true;

    // Null-space generator per free column, then a second reduction to make
    // the row set canonical.
    detail::RatMatrix basis;
    for (int free_col = 0; free_col < n; ++free_col) {
        if (is_pivot[static_cast<std::size_t>(free_col)]) continue;
        std::vector<detail::Rational> v(static_cast<std::size_t>(n));
        v[static_cast<std::size_t>(free_col)] = detail::Rational(1);
        for (std::size_t r = 0; r < st.size(); ++r)
            v[static_cast<std::size_t>(pivots[r])] =
                detail::Rational(0) - st[r][static_cast<std::size_t>(free_col)];
        basis.push_back(std::move(v));
    }
    detail::rref(basis);

    Eigen::MatrixXi out(static_cast<Eigen::Index>(basis.size()), n);
    for (std::size_t r = 0; r < basis.size(); ++r) {
        const auto row = detail::primitive_integer_row(basis[r]);
        for (int c = 0; c < n; ++c)
            out(static_cast<Eigen::Index>(r), c) = static_cast<int>(row[static_cast<std::size_t>(c)]);
    }
    return out;
}

/// Complex balance test at a strictly positive state: for every complex the
/// total inflow equals the total outflow within tol * (1 + outflow).
inline bool is_complex_balanced(const ReactionNetwork& net, std::span<const double> u,
                                double tol) {
    if (static_cast<int>(u.size()) != net.species_count())
        throw ValidationError("u", "dimension mismatch with species count");
    for (double x : u)
        if (!(x > 0.0)) throw ValidationError("u", "complex balance requires u > 0");

    struct Flow {
        double in = 0.0;
        double out = 0.0;
    };
    std::map<std::vector<int>, Flow> flows;
    for (const auto& pair : net.pairs()) {
        const double fwd = pair.k_fwd * detail::monomial(u, pair.alpha);
        const double bwd = pair.k_bwd * detail::monomial(u, pair.beta);
        auto& fa = flows[pair.alpha];
        fa.out += fwd;
        fa.in += bwd;
        auto& fb = flows[pair.beta];
        fb.out += bwd;
        fb.in += fwd;
    }
    for (const auto& [complex, flow] : flows) {
        (void)complex;
        if (std::abs(flow.in - flow.out) > tol * (1.0 + flow.out)) return false;
    }
    return true;
}

// ---------------------------------------------------------------------------
// Network text format.
//
//   reaction := complex ("<->" | "->") complex [ ";" "kf" "=" num [ "," "kr" "=" num ] ]
//   complex  := term ("+" term)*
//   term     := [uint] ident
//
// One reaction per line; '#' starts a comment; whitespace is insignificant.
// Only "<->" reactions are accepted (the model is reversible mass action);
// "->" parses but is rejected with a diagnostic.
// ---------------------------------------------------------------------------

namespace detail {

class NetworkParser {
public:
    explicit NetworkParser(std::string_view text) : text_(text) {}

    ReactionNetwork parse() {
        std::vector<Species> species;
        std::vector<ReversiblePair> pairs;
        std::map<std::string, int, std::less<>> index_of;

        int line_no = 0;
        std::size_t pos = 0;
        bool saw_reaction = false;
        while (pos <= text_.size()) {
            const std::size_t eol = std::min(text_.find('\n', pos), text_.size());
            std::string_view line = text_.substr(pos, eol - pos);
            ++line_no;
            if (const std::size_t hash = line.find('#'); hash != std::string_view::npos)
                line = line.substr(0, hash);
            if (!all_blank(line)) {
                parse_reaction(line, line_no, species, pairs, index_of);
                saw_reaction = true;
            }
            if (eol == text_.size()) break;
            pos = eol + 1;
        }
        if (!saw_reaction) throw ParseError("no reactions found", line_no, 1);
        return ReactionNetwork(std::move(species), std::move(pairs));
    }

private:
    static bool all_blank(std::string_view s) {
        return std::all_of(s.begin(), s.end(),
                           [](unsigned char c) { return std::isspace(c) != 0; });
    }

    struct Cursor {
        std::string_view line;
        std::size_t pos = 0;
        int line_no = 1;

        void skip_ws() {
            while (pos < line.size() && std::isspace(static_cast<unsigned char>(line[pos]))) ++pos;
        }
        bool eof() {
            skip_ws();
            return pos >= line.size();
        }
        int column() const { return static_cast<int>(pos) + 1; }
        [[noreturn]] void fail(const std::string& msg) const {
            throw ParseError(msg, line_no, column());
        }
    };

    using Terms = std::vector<std::pair<std::string, int>>;  // (name, coefficient)

    void parse_reaction(std::string_view line, int line_no, std::vector<Species>& species,
                        std::vector<ReversiblePair>& pairs,
                        std::map<std::string, int, std::less<>>& index_of) {
        Cursor cur{line, 0, line_no};

        const Terms lhs = parse_complex(cur);
        const bool reversible = parse_arrow(cur);
        const int arrow_col = cur.column();
        const Terms rhs = parse_complex(cur);

        double kf = 1.0, kr = 1.0;
        if (!cur.eof() && cur.line[cur.pos] == ';') {
            ++cur.pos;
            parse_rates(cur, kf, kr);
        }
        if (!cur.eof()) cur.fail("unexpected trailing input");
        if (!reversible)
            throw ParseError("irreversible reactions are not supported; use <->", line_no,
                             arrow_col);

        register_species(lhs, species, index_of);
        register_species(rhs, species, index_of);

        ReversiblePair pair;
        pair.alpha.assign(species.size(), 0);
        pair.beta.assign(species.size(), 0);
        for (const auto& [name, coeff] : lhs)
            pair.alpha[static_cast<std::size_t>(index_of.find(name)->second)] += coeff;
        for (const auto& [name, coeff] : rhs)
            pair.beta[static_cast<std::size_t>(index_of.find(name)->second)] += coeff;
        pair.k_fwd = kf;
        pair.k_bwd = kr;

        // Earlier pairs may predate newly mentioned species; pad them.
        for (auto& p : pairs) {
            p.alpha.resize(species.size(), 0);
            p.beta.resize(species.size(), 0);
        }
        if (pair.alpha == pair.beta)
            throw ParseError("degenerate reaction: both sides are the same complex", line_no, 1);
        if (!(kf > 0.0)) throw ParseError("kf must be positive", line_no, 1);
        if (!(kr > 0.0)) throw ParseError("kr must be positive", line_no, 1);
        pairs.push_back(std::move(pair));
    }

    Terms parse_complex(Cursor& cur) {
        Terms terms;
        while (true) {
            if (cur.eof()) cur.fail("expected a complex term");
            int coeff = 1;
            if (std::isdigit(static_cast<unsigned char>(cur.line[cur.pos]))) {
                coeff = parse_uint(cur);
                cur.skip_ws();
            }
            terms.emplace_back(parse_ident(cur), coeff);
            cur.skip_ws();
            if (cur.pos < cur.line.size() && cur.line[cur.pos] == '+') {
                ++cur.pos;
                continue;
            }
            break;
        }
        // Duplicate mentions of a species in one complex merge, e.g. B + B -> 2B.
        Terms merged;
        for (const auto& [name, coeff] : terms) {
            auto it = std::find_if(merged.begin(), merged.end(),
                                   [&](const auto& t) { return t.first == name; });
            if (it == merged.end())
                merged.emplace_back(name, coeff);
            else
                it->second += coeff;
        }
        return merged;
    }

    bool parse_arrow(Cursor& cur) {
        if (cur.eof()) cur.fail("expected '<->' or '->'");
        if (cur.line.substr(cur.pos, 3) == "<->") {
            cur.pos += 3;
            return true;
        }
        if (cur.line.substr(cur.pos, 2) == "->") {
            cur.pos += 2;
            return false;
        }
        cur.fail("expected '<->' or '->'");
    }

    void parse_rates(Cursor& cur, double& kf, double& kr) {
        expect_keyword(cur, "kf");
        expect_char(cur, '=');
        kf = parse_number(cur);
        if (!cur.eof() && cur.line[cur.pos] == ',') {
            ++cur.pos;
            expect_keyword(cur, "kr");
            expect_char(cur, '=');
            kr = parse_number(cur);
        }
    }

    void expect_keyword(Cursor& cur, std::string_view kw) {
        if (cur.eof() || cur.line.substr(cur.pos, kw.size()) != kw)
            cur.fail("expected '" + std::string(kw) + "'");
        cur.pos += kw.size();
    }

    void expect_char(Cursor& cur, char c) {
        if (cur.eof() || cur.line[cur.pos] != c) cur.fail(std::string("expected '") + c + "'");
        ++cur.pos;
    }

    int parse_uint(Cursor& cur) {
        int value = 0;
        auto [ptr, ec] = std::from_chars(cur.line.data() + cur.pos,
                                         cur.line.data() + cur.line.size(), value);
        if (ec != std::errc()) cur.fail("expected an integer coefficient");
        cur.pos = static_cast<std::size_t>(ptr - cur.line.data());
        return value;
    }

    double parse_number(Cursor& cur) {
        if (cur.eof()) cur.fail("expected a number");
        double value = 0.0;
        auto [ptr, ec] = std::from_chars(cur.line.data() + cur.pos,
                                         cur.line.data() + cur.line.size(), value);
        if (ec != std::errc()) cur.fail("expected a number");
        cur.pos = static_cast<std::size_t>(ptr - cur.line.data());
        return value;
    }

    std::string parse_ident(Cursor& cur) {
        if (cur.eof()) cur.fail("expected a species identifier");
        const char first = cur.line[cur.pos];
        if (!std::isalpha(static_cast<unsigned char>(first)) && first != '_')
            cur.fail("expected a species identifier");
        std::size_t end = cur.pos;
        while (end < cur.line.size() &&
               (std::isalnum(static_cast<unsigned char>(cur.line[end])) || cur.line[end] == '_'))
            ++end;
        std::string name(cur.line.substr(cur.pos, end - cur.pos));
        cur.pos = end;
        return name;
    }

    void register_species(const Terms& terms, std::vector<Species>& species,
                          std::map<std::string, int, std::less<>>& index_of) {
        for (const auto& [name, coeff] : terms) {
            (void)coeff;
            if (index_of.find(name) == index_of.end()) {
                const int idx = static_cast<int>(species.size());
                index_of.emplace(name, idx);
                species.push_back(Species{name, idx, 1.0});
            }
        }
    }

    std::string_view text_;
};

}  // namespace detail

/// Parse a reversible mass-action network from text. Species get indices in
/// first-mention order; coefficients and rate constants default to 1.
inline ReactionNetwork parse_network(std::string_view text) {
    if (text.empty()) throw ParseError("empty network text", 1, 1);
    return detail::NetworkParser(text).parse();
}

/// Canonical text form: one reaction per line, species in index order within
/// each complex, unit coefficients omitted, rates always spelled out.
/// parse_network(pretty_print(net)) reproduces net.
inline std::string pretty_print(const ReactionNetwork& net) {
    std::string out;
    for (const auto& pair : net.pairs()) {
        auto complex_text = [&](const std::vector<int>& y) {
            std::string s;
            for (std::size_t i = 0; i < y.size(); ++i) {
                if (y[i] == 0) continue;
                if (!s.empty()) s += " + ";
                if (y[i] != 1) s += std::to_string(y[i]) + " ";
                s += net.species()[i].name;
            }
            return s;
        };
        out += complex_text(pair.alpha) + " <-> " + complex_text(pair.beta) +
               " ; kf=" + format_double(pair.k_fwd) + ", kr=" + format_double(pair.k_bwd) + "\n";
    }
    return out;
}

}  // namespace crnlab
