#include "psmt/sharing.hpp"

#include <algorithm>

namespace psmt {

SharingParams SharingParams::make(const FieldSpec& f, size_t n, size_t k)
{
    if (n >= f.order()) throw ParamError("n must be below the field order");
    std::vector<FieldElement> pts;
    for (size_t i = 1; i <= n; ++i) pts.push_back(f.elem(i));
    return with_points(f, std::move(pts), k);
}

SharingParams SharingParams::with_points(const FieldSpec& f, std::vector<FieldElement> points, size_t k)
{
    SharingParams p;
    p.n = points.size();
    p.k = k;
    p.field = &f;
    p.points = std::move(points);
    p.validate();
    return p;
}

void SharingParams::validate() const
{
    if (!field) throw ParamError("sharing without a field");
    if (n == 0 || k >= n) throw ParamError("need 0 <= k < n");
    if (n >= field->order()) throw ParamError("n must be below the field order");
    if (points.size() != n) throw ParamError("wrong number of evaluation points");
    for (size_t i = 0; i < n; ++i) {
        if (&points[i].spec() != field) throw SpecMismatch("evaluation point from another field");
        if (points[i].is_zero()) throw ParamError("evaluation point zero is reserved for the secret");
        for (size_t j = 0; j < i; ++j)
            if (points[i] == points[j]) throw ParamError("evaluation points must be distinct");
    }
}

ReceivedWord ReceivedWord::from(const Codeword& c) { return from(c.shares); }

ReceivedWord ReceivedWord::from(const std::vector<FieldElement>& values)
{
    ReceivedWord w(values.size());
    for (size_t i = 0; i < values.size(); ++i) w.entries[i] = values[i];
    return w;
}

size_t ReceivedWord::present() const
{
    return size_t(std::count_if(entries.begin(), entries.end(), [](auto& e) { return e.has_value(); }));
}

FieldElement poly_eval(const std::vector<FieldElement>& coeffs, const FieldElement& x)
{
    FieldElement acc = x.spec().zero();
    for (size_t i = coeffs.size(); i-- > 0;) acc = acc * x + coeffs[i];
    return acc;
}

Codeword share_with(const FieldElement& secret, const std::vector<FieldElement>& coefficients,
                    const SharingParams& params)
{
    params.validate();
    if (coefficients.size() != params.k) throw ParamError("expected k random coefficients");
    if (&secret.spec() != params.field) throw SpecMismatch("secret from another field");
    std::vector<FieldElement> poly{secret};
    poly.insert(poly.end(), coefficients.begin(), coefficients.end());
    Codeword c;
    for (auto& x : params.points) c.shares.push_back(poly_eval(poly, x));
    return c;
}

Codeword share(const FieldElement& secret, const SharingParams& params, const CoinDraw& draw)
{
    std::vector<FieldElement> coeffs;
    for (size_t i = 0; i < params.k; ++i) coeffs.push_back(draw());
    return share_with(secret, coeffs, params);
}

Codeword share(const FieldElement& secret, const SharingParams& params, Rng& rng)
{
    return share(secret, params, [&] { return params.field->sample(rng); });
}

std::vector<FieldElement> interpolate(const std::vector<FieldElement>& xs,
                                      const std::vector<FieldElement>& ys)
{
    const FieldSpec& f = xs.at(0).spec();
    size_t m = xs.size();
    std::vector<FieldElement> out(m, f.zero());
    for (size_t i = 0; i < m; ++i) {
        // Basis polynomial prod_{j != i} (x - x_j) / (x_i - x_j).
        std::vector<FieldElement> basis{f.one()};
        FieldElement denom = f.one();
        for (size_t j = 0; j < m; ++j) {
            if (j == i) continue;
            std::vector<FieldElement> next(basis.size() + 1, f.zero());
            for (size_t d = 0; d < basis.size(); ++d) {
                next[d + 1] += basis[d];
                next[d] -= basis[d] * xs[j];
            }
            basis = std::move(next);
            denom *= xs[i] - xs[j];
        }
        FieldElement scale = ys[i] / denom;
        for (size_t d = 0; d < m; ++d) out[d] += basis[d] * scale;
    }
    return out;
}

namespace {

std::vector<size_t> present_indices(const ReceivedWord& w)
{
    std::vector<size_t> idx;
    for (size_t i = 0; i < w.entries.size(); ++i)
        if (w.entries[i]) idx.push_back(i);
    return idx;
}

void require_full(const ReceivedWord& w, const SharingParams& params)
{
    if (w.entries.size() != params.n) throw ParamError("word length differs from n");
    if (w.present() != params.n) throw MissingEntries("word has missing entries");
}

// Lagrange weights for f(0) from the points in idx.
FieldElement eval_zero(const ReceivedWord& w, const SharingParams& params, const std::vector<size_t>& idx)
{
    const FieldSpec& f = *params.field;
    FieldElement acc = f.zero();
    for (size_t a : idx) {
        FieldElement num = f.one(), den = f.one();
        for (size_t b : idx) {
            if (a == b) continue;
            num *= params.points[b];
            den *= params.points[b] - params.points[a];
        }
        acc += *w.entries[a] * num / den;
    }
    return acc;
}

// Solves A x = b by Gauss-Jordan elimination; free variables are set to 0.
std::optional<std::vector<FieldElement>> solve(std::vector<std::vector<FieldElement>> a,
                                               std::vector<FieldElement> b, const FieldSpec& f)
{
    size_t rows = a.size(), cols = rows ? a[0].size() : 0;
    std::vector<size_t> pivot_col;
    size_t r = 0;
    for (size_t c = 0; c < cols && r < rows; ++c) {
        size_t p = r;
        while (p < rows && a[p][c].is_zero()) ++p;
        if (p == rows) continue;
        std::swap(a[p], a[r]);
        std::swap(b[p], b[r]);
        FieldElement inv = a[r][c].inv();
        for (auto& x : a[r]) x *= inv;
        b[r] *= inv;
        for (size_t i = 0; i < rows; ++i) {
            if (i == r || a[i][c].is_zero()) continue;
            FieldElement factor = a[i][c];
            for (size_t j = 0; j < cols; ++j) a[i][j] -= factor * a[r][j];
            b[i] -= factor * b[r];
        }
        pivot_col.push_back(c);
        ++r;
    }
    for (size_t i = r; i < rows; ++i)
        if (!b[i].is_zero()) return std::nullopt;
    std::vector<FieldElement> x(cols, f.zero());
    for (size_t i = 0; i < r; ++i) x[pivot_col[i]] = b[i];
    return x;
}

// Long division; returns {quotient, remainder}.
std::pair<std::vector<FieldElement>, std::vector<FieldElement>> poly_divmod(std::vector<FieldElement> num,
                                                                            std::vector<FieldElement> den)
{
    const FieldSpec& f = num.at(0).spec();
    while (!den.empty() && den.back().is_zero()) den.pop_back();
    if (den.empty()) throw DivisionByZero("polynomial division by zero");
    const size_t dn = den.size();
    if (num.size() < dn) return {{f.zero()}, num};
    std::vector<FieldElement> q(num.size() - dn + 1, f.zero());
    FieldElement lead_inv = den.back().inv();
    for (size_t s = q.size(); s-- > 0;) {
        FieldElement c = num[s + dn - 1] * lead_inv;
        q[s] = c;
        for (size_t j = 0; j < dn; ++j) num[s + j] -= c * den[j];
    }
    num.resize(dn - 1);
    return {q, num};
}

}  // namespace

FieldElement reconstruct(const ReceivedWord& word, const SharingParams& params)
{
    params.validate();
    auto idx = present_indices(word);
    if (idx.size() < params.k + 1)
        throw InsufficientShares("need " + std::to_string(params.k + 1) + " shares, have " +
                                 std::to_string(idx.size()));
    idx.resize(params.k + 1);
    return eval_zero(word, params, idx);
}

Detection detect_errors(const ReceivedWord& word, const SharingParams& params, size_t max_detect)
{
    params.validate();
    if (max_detect > params.max_detectable()) throw ParamError("detection bound above n-k-1");
    require_full(word, params);
    std::vector<FieldElement> xs, ys;
    for (size_t i = 0; i <= params.k; ++i) {
        xs.push_back(params.points[i]);
        ys.push_back(*word.entries[i]);
    }
    auto poly = interpolate(xs, ys);
    for (size_t i = params.k + 1; i < params.n; ++i)
        if (poly_eval(poly, params.points[i]) != *word.entries[i]) return Detection::Corrupted;
    return Detection::Clean;
}

// Berlekamp-Welch: find monic E of degree e and Q of degree <= e+k with
// Q(x_i) = y_i E(x_i); then f = Q / E.
Correction correct_errors(const ReceivedWord& word, const SharingParams& params, size_t e)
{
    params.validate();
    if (e > params.max_correctable()) throw ParamError("correction radius above (n-k-1)/2");
    require_full(word, params);
    const FieldSpec& f = *params.field;
    const size_t n = params.n, k = params.k;
    Correction out;

    std::vector<FieldElement> poly;
    if (e == 0) {
        if (detect_errors(word, params, 0) == Detection::Corrupted) return out;
        std::vector<FieldElement> xs(params.points.begin(), params.points.begin() + k + 1), ys;
        for (size_t i = 0; i <= k; ++i) ys.push_back(*word.entries[i]);
        poly = interpolate(xs, ys);
    } else {
        // Unknowns: E_0..E_{e-1}, Q_0..Q_{e+k}.
        size_t cols = e + (e + k + 1);
        std::vector<std::vector<FieldElement>> a(n, std::vector<FieldElement>(cols, f.zero()));
        std::vector<FieldElement> b(n, f.zero());
        for (size_t i = 0; i < n; ++i) {
            const FieldElement& x = params.points[i];
            const FieldElement& y = *word.entries[i];
            FieldElement xp = f.one();
            for (size_t j = 0; j < e; ++j) {
                a[i][j] = -(y * xp);
                xp *= x;
            }
            b[i] = y * xp;  // y * x^e from the monic term
            xp = f.one();
            for (size_t j = 0; j <= e + k; ++j) {
                a[i][e + j] = xp;
                xp *= x;
            }
        }
        auto sol = solve(std::move(a), std::move(b), f);
        if (!sol) return out;
        std::vector<FieldElement> epoly(sol->begin(), sol->begin() + e), qpoly(sol->begin() + e, sol->end());
        epoly.push_back(f.one());
        auto [quot, rem] = poly_divmod(qpoly, epoly);
        for (auto& r : rem)
            if (!r.is_zero()) return out;
        quot.resize(std::max(quot.size(), k + 1), f.zero());
        for (size_t i = k + 1; i < quot.size(); ++i)
            if (!quot[i].is_zero()) return out;
        quot.resize(k + 1);
        poly = std::move(quot);
    }

    for (size_t i = 0; i < n; ++i) {
        FieldElement v = poly_eval(poly, params.points[i]);
        if (v != *word.entries[i]) out.error_positions.push_back(i);
        out.codeword.shares.push_back(v);
    }
    if (out.error_positions.size() > e) {
        out.error_positions.clear();
        out.codeword.shares.clear();
        return out;
    }
    out.status = Correction::Corrected;
    out.secret = poly[0];
    return out;
}

OracleResult oracle_decode(const ReceivedWord& word, const SharingParams& params)
{
    params.validate();
    require_full(word, params);
    const FieldSpec& f = *params.field;
    const uint64_t q = f.order();
    uint64_t candidates = 1;
    for (size_t i = 0; i <= params.k; ++i) {
        candidates *= q;
        if (candidates > kOracleLimit) throw OracleTooLarge("more than 10^7 candidate polynomials");
    }
    const size_t n = params.n, d = params.k + 1;
    std::vector<uint32_t> coeff(d, 0), y(n), xs(n);
    for (size_t i = 0; i < n; ++i) {
        y[i] = word.entries[i]->value();
        xs[i] = params.points[i].value();
    }
    OracleResult res;
    res.distance = n + 1;
    std::vector<std::vector<uint32_t>> best;
    for (uint64_t c = 0; c < candidates; ++c) {
        size_t dist = 0;
        std::vector<uint32_t> vals(n);
        for (size_t i = 0; i < n && dist <= res.distance; ++i) {
            uint32_t acc = 0;
            for (size_t j = d; j-- > 0;) acc = f.add(f.mul(acc, xs[i]), coeff[j]);
            vals[i] = acc;
            if (acc != y[i]) ++dist;
        }
        if (dist < res.distance) {
            res.distance = dist;
            best.clear();
        }
        if (dist == res.distance) {
            best.push_back(vals);
            best.back().insert(best.back().begin(), coeff[0]);
        }
        for (size_t j = 0; j < d; ++j) {
            if (++coeff[j] < q) break;
            coeff[j] = 0;
        }
    }
    for (auto& b : best) {
        res.secrets.push_back(f.elem(b[0]));
        Codeword cw;
        for (size_t i = 1; i < b.size(); ++i) cw.shares.push_back(f.elem(b[i]));
        res.nearest.push_back(std::move(cw));
    }
    return res;
}

}  // namespace psmt
