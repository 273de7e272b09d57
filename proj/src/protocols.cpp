#include "psmt/protocols.hpp"

#include <algorithm>
#include <numeric>
#include <set>

#include "psmt/auth.hpp"
#include "psmt/sharing.hpp"

namespace psmt {

namespace {

// ---- sharing over channel positions ----
// Position i of a channel list always uses evaluation point i+1, so a
// shrinking channel set keeps its points.

void require_points(const FieldSpec& f, size_t n)
{
    if (f.order() <= n)
        throw PreconditionError(f.name() + " has too few elements for " + std::to_string(n) +
                                " evaluation points");
}

std::vector<FieldElement> share_at(Session& s, const FieldElement& secret, size_t deg,
                                   const std::vector<size_t>& positions)
{
    const FieldSpec& f = s.field();
    size_t top = 0;
    for (size_t p : positions) top = std::max(top, p + 1);
    require_points(f, top);
    std::vector<FieldElement> coeffs{secret};
    for (size_t i = 0; i < deg; ++i) coeffs.push_back(s.coins().draw());
    std::vector<FieldElement> out;
    for (size_t p : positions) out.push_back(poly_eval(coeffs, f.elem(p + 1)));
    return out;
}

std::vector<size_t> iota_n(size_t n)
{
    std::vector<size_t> v(n);
    std::iota(v.begin(), v.end(), size_t(0));
    return v;
}

SharingParams params_at(const FieldSpec& f, const std::vector<size_t>& positions, size_t deg)
{
    std::vector<FieldElement> pts;
    for (size_t p : positions) pts.push_back(f.elem(p + 1));
    return SharingParams::with_points(f, pts, deg);
}

// Corrects up to e errors; nullopt when decoding is refused.
std::optional<FieldElement> correct_at(const FieldSpec& f, const std::vector<size_t>& positions,
                                       const std::vector<FieldElement>& values, size_t deg, size_t e)
{
    if (positions.size() <= deg) return std::nullopt;
    auto params = params_at(f, positions, deg);
    e = std::min(e, params.max_correctable());
    auto c = correct_errors(ReceivedWord::from(values), params, e);
    if (!c.ok()) return std::nullopt;
    return c.secret;
}

// The secret when the word is a codeword, nullopt when an error shows.
std::optional<FieldElement> clean_at(const FieldSpec& f, const std::vector<size_t>& positions,
                                     const std::vector<FieldElement>& values, size_t deg)
{
    if (positions.size() <= deg) return std::nullopt;
    auto params = params_at(f, positions, deg);
    auto word = ReceivedWord::from(values);
    if (detect_errors(word, params, params.max_detectable()) == Detection::Corrupted) return std::nullopt;
    return reconstruct(word, params);
}

FieldElement interpolate_at(const FieldSpec& f, const std::vector<size_t>& positions,
                            const std::vector<FieldElement>& values, size_t deg)
{
    if (positions.size() <= deg) throw InsufficientShares("too few shares left");
    std::vector<size_t> p(positions.begin(), positions.begin() + deg + 1);
    std::vector<FieldElement> v(values.begin(), values.begin() + deg + 1);
    return reconstruct(ReceivedWord::from(v), params_at(f, p, deg));
}

// ---- wire helpers ----

Payload bits(const std::vector<bool>& b)
{
    Payload p;
    for (bool x : b) p.push_back(Word{x ? 1u : 0u, {}});
    return p;
}

std::vector<bool> read_bits(Reader& r, size_t n)
{
    std::vector<bool> out;
    for (size_t i = 0; i < n; ++i) out.push_back(r.elem().value() == 1);
    return out;
}

std::vector<FieldElement> field_bits(const FieldSpec& f, const std::vector<bool>& b)
{
    std::vector<FieldElement> out;
    for (bool x : b) out.push_back(x ? f.one() : f.zero());
    return out;
}

Payload cat(Payload a, const Payload& b)
{
    a.insert(a.end(), b.begin(), b.end());
    return a;
}

void send_all(Session& s, const std::vector<int>& chans, int slot, const Payload& p)
{
    for (int c : chans) s.send(c, slot, p);
}

void require_majority(const std::vector<int>& chans, size_t k)
{
    if (chans.size() < 2 * k + 1)
        throw PreconditionError("reliable transmission needs " + std::to_string(2 * k + 1) + " paths");
}

Reader majority_reader(const Session& s, const Inbox& in, const std::vector<int>& chans, int slot)
{
    return Reader(s.field(), majority_vote(in, chans, slot));
}

std::vector<int> without(const std::vector<int>& v, size_t pos)
{
    std::vector<int> out = v;
    out.erase(out.begin() + long(pos));
    return out;
}

// B keeps its output once it has one; later recoveries are ignored.
void settle(std::optional<FieldElement>& out, const std::optional<FieldElement>& v)
{
    if (!out && v) out = v;
}

// ---- oneway (0, delta) ----

// 2k+1 rounds; round i carries share i with 2k+1 tags on p_i and key i,j on
// p_j. A share is valid when at least k+1 of its tags verify.
struct TaggedShares {
    std::vector<std::optional<FieldElement>> valid;
};

TaggedShares tagged_share_rounds(Session& s, const FieldElement& m, size_t k, const std::vector<int>& fwd)
{
    const size_t n = fwd.size();
    auto shares = share_at(s, m, k, iota_n(n));
    TaggedShares out;
    out.valid.resize(n);
    for (size_t i = 0; i < n; ++i) {
        std::vector<LinearKey> keys;
        for (size_t j = 0; j < n; ++j) keys.push_back({s.coins().draw(), s.coins().draw()});
        Payload head = pack({shares[i]});
        for (const auto& key : keys) head.push_back(to_word(auth_linear(shares[i], key).value));
        s.send(fwd[i], 0, head);
        for (size_t j = 0; j < n; ++j) s.send(fwd[j], 1, pack({keys[j].a, keys[j].b}));
        auto in = s.exchange();

        Reader r = read(s, in, fwd[i], 0);
        FieldElement si = r.elem();
        auto tags = r.elems(n);
        size_t t = 0;
        for (size_t j = 0; j < n; ++j) {
            Reader kr = read(s, in, fwd[j], 1);
            LinearKey key{kr.elem(), kr.elem()};
            if (verify(si, AuthTag{tags[j]}, key)) ++t;
        }
        if (t >= k + 1) out.valid[i] = si;
    }
    return out;
}

std::optional<FieldElement> decode_valid(const FieldSpec& f, const TaggedShares& t, size_t k)
{
    std::vector<size_t> pos;
    std::vector<FieldElement> vals;
    for (size_t i = 0; i < t.valid.size(); ++i)
        if (t.valid[i]) {
            pos.push_back(i);
            vals.push_back(*t.valid[i]);
        }
    if (pos.size() < k + 1) return std::nullopt;
    if (auto v = correct_at(f, pos, vals, k, (pos.size() - k - 1) / 2)) return v;
    return interpolate_at(f, pos, vals, k);
}

std::optional<FieldElement> oneway_0delta(Session& s, const FieldElement& m, size_t k)
{
    auto fwd = s.network().forward();
    if (fwd.size() < 2 * k + 1) throw PreconditionError("needs 2k+1 forward paths");
    fwd.resize(2 * k + 1);
    return decode_valid(s.field(), tagged_share_rounds(s, m, k, fwd), k);
}

// ---- k = 1 with one feedback path ----

std::optional<FieldElement> k1_feedback(Session& s, const FieldElement& m)
{
    const FieldSpec& f = s.field();
    auto fwd = s.network().forward();
    auto bwd = s.network().backward();
    if (fwd.size() < 2 || bwd.empty()) throw PreconditionError("needs two forward paths and one backward path");
    const int q = bwd[0];

    // Step 1.
    FieldElement s0 = s.coins().draw();
    FieldElement sh[2] = {s0, m - s0};
    LinearKey key[2];
    for (auto& kk : key) kk = {s.coins().draw(), s.coins().draw()};
    Payload sent[2];
    for (int i = 0; i < 2; ++i) {
        sent[i] = pack({sh[i], key[i].a, key[i].b, auth_linear(sh[i], key[1 - i]).value});
        s.send(fwd[i], 0, sent[i]);
    }
    auto in = s.exchange();

    // Step 2.
    std::vector<FieldElement> got[2];
    for (int i = 0; i < 2; ++i) got[i] = read(s, in, fwd[i]).elems(4);
    bool ok = true;
    for (int i = 0; i < 2; ++i)
        ok = ok && verify(got[i][0], AuthTag{got[i][3]}, LinearKey{got[1 - i][1], got[1 - i][2]});
    std::optional<FieldElement> out;
    LinearKey bkey;
    if (ok) {
        out = got[0][0] + got[1][0];
        s.send(q, kControlSlot, pack_symbol(Symbol::Ok));
    } else {
        bkey = {s.coins().draw(), s.coins().draw()};
        Payload report = pack({bkey.a, bkey.b});
        for (int i = 0; i < 2; ++i) report = cat(report, pack(got[i]));
        s.send(q, 0, report);
    }
    in = s.exchange();

    // Step 3.
    if (Reader(f, lookup(in, q, kControlSlot)).symbol() == Symbol::Ok && !lookup(in, q, 0)) return out;
    Reader rep = read(s, in, q, 0);
    LinearKey akey{rep.elem(), rep.elem()};
    int good = 0;
    for (int i = 0; i < 2; ++i) {
        auto echoed = rep.elems(4);
        if (same_values(pack(echoed), sent[i])) {
            good = i;
            break;
        }
    }
    s.send(fwd[good], 0, pack({m, auth_linear(m, akey).value}));
    in = s.exchange();

    // Step 4.
    if (!out) {
        for (int i = 0; i < 2 && !out; ++i) {
            if (!lookup(in, fwd[i])) continue;
            Reader r = read(s, in, fwd[i]);
            FieldElement mm = r.elem();
            FieldElement tag = r.elem();
            if (verify(mm, AuthTag{tag}, bkey)) out = mm;
        }
    }
    return out;
}

// ---- subset enumeration (0, delta) ----

std::vector<std::vector<size_t>> k_subsets(size_t n, size_t k)
{
    std::vector<std::vector<size_t>> out;
    std::vector<size_t> cur;
    std::function<void(size_t)> rec = [&](size_t start) {
        if (cur.size() == k) {
            out.push_back(cur);
            return;
        }
        for (size_t i = start; i < n; ++i) {
            cur.push_back(i);
            rec(i + 1);
            cur.pop_back();
        }
    };
    rec(0);
    return out;
}

std::optional<FieldElement> subset_enum_0delta(Session& s, const FieldElement& m, size_t k, size_t u)
{
    const FieldSpec& f = s.field();
    auto fwd = s.network().forward();
    auto bwd = s.network().backward();
    if (u < 1 || u > k || fwd.size() < 2 * k + 1 - u || bwd.size() < u)
        throw PreconditionError("needs 2k+1-u forward and u backward paths, 1 <= u <= k");
    fwd.resize(2 * k + 1 - u);
    bwd.resize(u);
    const size_t nf = fwd.size();
    std::optional<FieldElement> out;

    // Universe: forward paths 0..nf-1, then backward paths.
    for (const auto& sub : k_subsets(nf + u, k + 1)) {
        std::vector<size_t> ps, qs;
        for (size_t x : sub) (x < nf ? ps : qs).push_back(x < nf ? x : x - nf);

        std::vector<LinearKey> akeys;
        for (size_t i : ps) {
            akeys.push_back({s.coins().draw(), s.coins().draw()});
            s.send(fwd[i], 0, pack({akeys.back().a, akeys.back().b}));
        }
        auto in = s.exchange();
        FieldElement cb = f.zero(), db = f.zero();
        for (size_t i : ps) {
            Reader r = read(s, in, fwd[i]);
            cb += r.elem();
            db += r.elem();
        }

        // B keeps contributing keys even after it has an output.
        for (size_t j : qs) {
            FieldElement c = s.coins().draw(), d = s.coins().draw();
            cb += c;
            db += d;
            s.send(bwd[j], 0, pack({c, d}));
        }
        in = s.exchange();
        FieldElement ca = f.zero(), da = f.zero();
        for (const auto& key : akeys) {
            ca += key.a;
            da += key.b;
        }
        for (size_t j : qs) {
            Reader r = read(s, in, bwd[j]);
            ca += r.elem();
            da += r.elem();
        }

        FieldElement e = m + ca;
        for (size_t i : ps) s.send(fwd[i], 0, pack({e, auth_linear(e, {ca, da}).value}));
        in = s.exchange();
        std::optional<Payload> first;
        bool agree = true;
        for (size_t i : ps) {
            auto p = lookup(in, fwd[i]);
            if (!p) p = Payload{};
            if (!first)
                first = p;
            else if (!same_values(*first, *p))
                agree = false;
        }
        if (agree && first) {
            Reader r(f, first);
            FieldElement eb = r.elem(), tag = r.elem();
            if (verify(eb, AuthTag{tag}, LinearKey{cb, db})) settle(out, eb - cb);
        }
    }
    return out;
}

// ---- efficient (0, delta) ----

std::optional<FieldElement> efficient_0delta(Session& s, const FieldElement& m, size_t k, size_t u)
{
    const FieldSpec& f = s.field();
    auto fwd = s.network().forward();
    auto bwd = s.network().backward();
    if (u < 1 || u > k || fwd.size() < 2 * k + 1 - u || bwd.size() < u)
        throw PreconditionError("needs 2k+1-u forward and u backward paths, 1 <= u <= k");
    fwd.resize(2 * k + 1 - u);
    bwd.resize(u);
    const size_t n = fwd.size();

    // Rounds 1 .. 2k+1-u.
    std::optional<FieldElement> out = decode_valid(f, tagged_share_rounds(s, m, k, fwd), k);

    // Round 2k+2-u: quadratic keys.
    std::vector<QuadKey> qa;
    for (size_t i = 0; i < n; ++i) {
        qa.push_back({s.coins().draw(), s.coins().draw(), s.coins().draw()});
        s.send(fwd[i], 0, pack({qa[i].a, qa[i].b, qa[i].c}));
    }
    auto in = s.exchange();
    std::vector<QuadKey> qb;
    Payload beta;
    for (size_t i = 0; i < n; ++i) {
        Reader r = read(s, in, fwd[i]);
        qb.push_back({r.elem(), r.elem(), r.elem()});
    }
    for (size_t i = 0; i < n; ++i) {
        FieldElement r = s.coins().draw();
        beta = cat(beta, pack({r, auth_quad(r, qb[i]).value}));
    }

    // Feedback rounds 2k+3-u .. 2k+2, local index j = 0..u-1 uses q_j.
    std::vector<FieldElement> db(u), eb(u);
    std::vector<Payload> beta_a(u);
    std::vector<FieldElement> da(u), ea(u);
    std::vector<std::vector<FieldElement>> alpha(u);
    std::vector<std::vector<LinearKey>> vw(u, std::vector<LinearKey>(u));
    for (size_t j = 0; j < u; ++j) {
        db[j] = s.coins().draw();
        eb[j] = s.coins().draw();
        std::vector<LinearKey> keys;
        Payload tags;
        for (size_t l = 0; l < u; ++l) {
            keys.push_back({s.coins().draw(), s.coins().draw()});
            tags.push_back(to_word(auth_items({db[j], eb[j]}, keys.back()).value));
        }
        s.send(bwd[j], 0, cat(cat(pack({db[j], eb[j]}), beta), tags));
        for (size_t l = 0; l < u; ++l) s.send(bwd[l], 1, pack({keys[l].a, keys[l].b}));
        in = s.exchange();
        Reader r = read(s, in, bwd[j], 0);
        da[j] = r.elem();
        ea[j] = r.elem();
        beta_a[j] = pack(r.elems(2 * n));
        alpha[j] = r.elems(u);
        for (size_t l = 0; l < u; ++l) {
            Reader kr = read(s, in, bwd[l], 1);
            vw[j][l] = {kr.elem(), kr.elem()};
        }
    }

    // A partitions the backward paths into agreement classes.
    auto compatible = [&](size_t a, size_t b) {
        return same_values(beta_a[a], beta_a[b]) && verify_items({da[a], ea[a]}, AuthTag{alpha[a][b]}, vw[a][b]) &&
               verify_items({da[b], ea[b]}, AuthTag{alpha[b][a]}, vw[b][a]);
    };
    std::vector<std::vector<size_t>> classes;
    for (size_t j = 0; j < u; ++j) {
        bool placed = false;
        for (auto& c : classes) {
            bool fits = compatible(j, j);
            for (size_t x : c) fits = fits && compatible(j, x);
            if (fits) {
                c.push_back(j);
                placed = true;
                break;
            }
        }
        if (!placed) classes.push_back({j});
    }

    // Delivery rounds 2k+3 .. 2k+2+u, local index l = 0..u-1 uses class l.
    for (size_t l = 0; l < u; ++l) {
        if (l < classes.size()) {
            const auto& cls = classes[l];
            Reader br(f, beta_a[cls[0]]);
            std::vector<bool> pset(n, false), qset(u, false);
            size_t verified = 0;
            for (size_t i = 0; i < n; ++i) {
                FieldElement r = br.elem(), g = br.elem();
                if (verify(r, AuthTag{g}, qa[i])) {
                    pset[i] = true;
                    ++verified;
                }
            }
            for (size_t j : cls) qset[j] = true;
            const size_t t_l = verified + cls.size();
            if (t_l > k) {
                FieldElement c = f.zero(), d = f.zero();
                for (size_t i = 0; i < n; ++i)
                    if (pset[i]) {
                        c += qa[i].a;
                        d += qa[i].b;
                    }
                for (size_t j : cls) {
                    c += da[j];
                    d += ea[j];
                }
                auto items = field_bits(f, qset);
                auto pitems = field_bits(f, pset);
                items.insert(items.end(), pitems.begin(), pitems.end());
                items.push_back(m + c);
                Payload msg = cat(pack(items), pack({auth_items(items, {c, d}).value}));
                for (size_t i = 0; i < n; ++i)
                    if (pset[i]) s.send(fwd[i], 0, msg);
            }
        }
        in = s.exchange();
        for (size_t i = 0; i < n; ++i) {
            if (!lookup(in, fwd[i])) continue;
            Reader r = read(s, in, fwd[i]);
            auto items = r.elems(u + n + 1);
            FieldElement tag = r.elem();
            if (r.malformed()) continue;
            FieldElement c = f.zero(), d = f.zero();
            bool sets_ok = true;
            for (size_t j = 0; j < u + n; ++j) {
                if (items[j].value() > 1) sets_ok = false;
                if (items[j].value() != 1) continue;
                if (j < u) {
                    c += db[j];
                    d += eb[j];
                } else {
                    c += qb[j - u].a;
                    d += qb[j - u].b;
                }
            }
            if (sets_ok && verify_items(items, AuthTag{tag}, {c, d})) settle(out, items.back() - c);
        }
    }
    return out;
}

// ---- perfect, one feedback path ----

std::optional<FieldElement> perfect_u1_on(Session& s, const FieldElement& m, size_t k, std::vector<int> fwd, int q)
{
    const FieldSpec& f = s.field();
    if (k < 2) throw PreconditionError("needs k >= 2");
    if (fwd.size() < 3 * k - 1) throw PreconditionError("needs 3k-1 forward paths");
    fwd.resize(3 * k - 1);
    const size_t n = fwd.size();
    const auto all = iota_n(n);
    std::vector<std::optional<FieldElement>> mhat;
    std::vector<FieldElement> sent, got;

    for (size_t I = 0; I < n; ++I) {
        sent = share_at(s, m, k, all);
        for (size_t i = 0; i < n; ++i) s.send(fwd[i], 0, pack({sent[i]}));
        auto in = s.exchange();

        got.clear();
        for (size_t i = 0; i < n; ++i) got.push_back(read(s, in, fwd[i]).elem());
        mhat.push_back(correct_at(f, all, got, k, k - 1));
        s.send(q, 0, pack({got[I]}));
        in = s.exchange();

        const bool match = read(s, in, q).elem() == sent[I];
        send_all(s, fwd, kControlSlot, pack_symbol(match ? Symbol::MaybeOk : Symbol::Faulty));
        std::vector<size_t> rest;
        if (!match) {
            for (size_t i = 0; i < n; ++i)
                if (i != I) rest.push_back(i);
            auto r = share_at(s, m, k - 1, rest);
            for (size_t x = 0; x < rest.size(); ++x) s.send(fwd[rest[x]], 1, pack({r[x]}));
        }
        in = s.exchange();
        if (majority_reader(s, in, fwd, kControlSlot).symbol() == Symbol::Faulty) {
            if (rest.empty())
                for (size_t i = 0; i < n; ++i)
                    if (i != I) rest.push_back(i);
            std::vector<FieldElement> rv;
            for (size_t i : rest) rv.push_back(read(s, in, fwd[i], 1).elem());
            return correct_at(f, rest, rv, k - 1, k - 1);
        }
    }

    // Final exchange. Every round's recovered value enters the comparison.
    bool equal = true;
    for (const auto& x : mhat) equal = equal && x && mhat[0] && *x == *mhat[0];
    std::optional<FieldElement> out;
    if (equal) {
        out = mhat[0];
        s.send(q, kControlSlot, pack_symbol(Symbol::Stop));
    } else {
        s.send(q, 0, pack(got));
    }
    auto in = s.exchange();

    auto report = lookup(in, q, 0);
    if (!report || report->size() != n) return out;  // anything else: A stops
    Reader r(f, report);
    std::vector<bool> bad(n);
    for (size_t i = 0; i < n; ++i) bad[i] = r.elem() != sent[i];
    send_all(s, fwd, 0, bits(bad));
    in = s.exchange();
    if (out) return out;
    Reader pr = majority_reader(s, in, fwd, 0);
    auto pb = read_bits(pr, n);
    std::vector<size_t> keep;
    std::vector<FieldElement> kv;
    for (size_t i = 0; i < n; ++i)
        if (!pb[i]) {
            keep.push_back(i);
            kv.push_back(got[i]);
        }
    if (keep.size() < k + 1) return std::nullopt;
    return interpolate_at(f, keep, kv, k);
}

std::optional<FieldElement> perfect_u1(Session& s, const FieldElement& m, size_t k)
{
    auto bwd = s.network().backward();
    if (bwd.empty()) throw PreconditionError("needs a backward path");
    return perfect_u1_on(s, m, k, s.network().forward(), bwd[0]);
}

// ---- the R1/R2 fallback shared by the recursive and efficient protocols ----

using Recurse = std::function<std::optional<FieldElement>(size_t k, size_t u, std::vector<int> fwd,
                                                          std::vector<int> bwd)>;

// One detect-only transfer of `value` with feedback. Returns {true, i0, j0}
// when A found a mismatch.
struct Probe {
    bool faulty = false;
    size_t i0 = 0, j0 = 0;
    std::optional<FieldElement> recovered;  // at B
};

Probe detect_probe(Session& s, const FieldElement& value, size_t k, const std::vector<int>& fwd,
                   const std::vector<int>& bwd, Symbol pass)
{
    const FieldSpec& f = s.field();
    const size_t n = fwd.size();
    const auto all = iota_n(n);
    auto sh = share_at(s, value, k, all);
    for (size_t i = 0; i < n; ++i) s.send(fwd[i], 0, pack({sh[i]}));
    auto in = s.exchange();

    Probe pr;
    std::vector<FieldElement> got;
    for (size_t i = 0; i < n; ++i) got.push_back(read(s, in, fwd[i]).elem());
    pr.recovered = clean_at(f, all, got, k);
    for (int q : bwd) {
        if (pr.recovered)
            s.send(q, kControlSlot, pack_symbol(Symbol::Ok));
        else
            s.send(q, 0, pack(got));
    }
    in = s.exchange();

    // A: a share report that differs names (p_i0, q_j0). An OK alone is no
    // report; a silent path reads as a default report.
    for (size_t j = 0; j < bwd.size() && !pr.faulty; ++j) {
        auto data = lookup(in, bwd[j], 0);
        auto ctl = lookup(in, bwd[j], kControlSlot);
        if (!data && ctl && Reader(f, ctl).symbol() == Symbol::Ok) continue;
        Reader r(f, data);
        for (size_t i = 0; i < n; ++i)
            if (r.elem() != sh[i]) {
                pr.faulty = true;
                pr.i0 = i;
                pr.j0 = j;
                break;
            }
    }
    send_all(s, fwd, kControlSlot, pr.faulty ? pack_symbol(Symbol::Faulty) : pack_symbol(pass));
    if (pr.faulty) send_all(s, fwd, 0, Payload{Word{uint32_t(pr.i0), {}}, Word{uint32_t(pr.j0), {}}});
    in = s.exchange();

    // B follows what it reliably received.
    Symbol sym = majority_reader(s, in, fwd, kControlSlot).symbol();
    pr.faulty = sym == Symbol::Faulty;
    if (pr.faulty) {
        auto idx = majority_vote(in, fwd, 0).value_or(Payload{});
        pr.i0 = idx.size() > 0 ? std::min<size_t>(idx[0].v, n - 1) : 0;
        pr.j0 = idx.size() > 1 ? std::min<size_t>(idx[1].v, bwd.size() - 1) : 0;
    }
    return pr;
}

std::optional<FieldElement> r_phase(Session& s, const FieldElement& m, size_t k, size_t u,
                                    const std::vector<int>& fwd, const std::vector<int>& bwd,
                                    std::optional<FieldElement> out, const Recurse& recurse)
{
    FieldElement r1 = s.coins().draw();
    Probe a = detect_probe(s, r1, k, fwd, bwd, Symbol::Continue);
    if (a.faulty) {
        auto sub = recurse(k - 1, u - 1, without(fwd, a.i0), without(bwd, a.j0));
        settle(out, sub);
        return out;
    }
    Probe b = detect_probe(s, m - r1, k, fwd, bwd, Symbol::Stop);
    if (b.faulty) {
        auto sub = recurse(k - 1, u - 1, without(fwd, b.i0), without(bwd, b.j0));
        settle(out, sub);
        return out;
    }
    if (a.recovered && b.recovered) settle(out, *a.recovered + *b.recovered);
    return out;
}

// B's "stop on all paths" feedback; A goes on unless every path says stop.
bool all_stop(Session& s, const std::vector<int>& bwd, bool stop)
{
    for (int q : bwd) s.send(q, kControlSlot, pack_symbol(stop ? Symbol::Stop : Symbol::Continue));
    auto in = s.exchange();
    for (int q : bwd)
        if (read(s, in, q, kControlSlot).symbol() != Symbol::Stop) return false;
    return true;
}

// ---- perfect, ordered u-subsets with recursion ----

std::vector<std::vector<size_t>> ordered_subsets(size_t n, size_t u)
{
    std::vector<std::vector<size_t>> out;
    std::vector<size_t> cur;
    std::vector<bool> used(n, false);
    std::function<void()> rec = [&] {
        if (cur.size() == u) {
            out.push_back(cur);
            return;
        }
        for (size_t i = 0; i < n; ++i) {
            if (used[i]) continue;
            used[i] = true;
            cur.push_back(i);
            rec();
            cur.pop_back();
            used[i] = false;
        }
    };
    rec();
    return out;
}

size_t recursive_paths(size_t k, size_t u) { return std::max(3 * k + 1 - 2 * u, 2 * k + 1); }

std::optional<FieldElement> perfect_recursive_on(Session& s, const FieldElement& m, size_t k, size_t u,
                                                 std::vector<int> fwd, std::vector<int> bwd)
{
    const FieldSpec& f = s.field();
    if (k < 2 || u < 1 || u > k) throw PreconditionError("needs k >= 2 and 1 <= u <= k");
    if (u == 1 || k == 2) {
        if (bwd.empty()) throw PreconditionError("needs a backward path");
        return perfect_u1_on(s, m, k, fwd, bwd[0]);
    }
    const size_t n = recursive_paths(k, u);
    if (fwd.size() < n || bwd.size() < u) throw PreconditionError("too few paths for the recursive protocol");
    fwd.resize(n);
    bwd.resize(u);
    require_majority(fwd, k);
    const auto all = iota_n(n);
    Recurse recurse = [&](size_t k2, size_t u2, std::vector<int> f2, std::vector<int> b2) {
        return perfect_recursive_on(s, m, k2, u2, std::move(f2), std::move(b2));
    };

    std::vector<std::optional<FieldElement>> mhat;
    for (const auto& h : ordered_subsets(n, u)) {
        auto sent = share_at(s, m, k, all);
        for (size_t i = 0; i < n; ++i) s.send(fwd[i], 0, pack({sent[i]}));
        auto in = s.exchange();

        std::vector<FieldElement> got;
        for (size_t i = 0; i < n; ++i) got.push_back(read(s, in, fwd[i]).elem());
        mhat.push_back(correct_at(f, all, got, k, k - u));
        for (size_t i = 0; i < u; ++i) s.send(bwd[i], 0, pack({got[h[i]]}));
        in = s.exchange();

        std::optional<size_t> i0;
        for (size_t i = 0; i < u && !i0; ++i)
            if (read(s, in, bwd[i]).elem() != sent[h[i]]) i0 = i;
        send_all(s, fwd, kControlSlot, pack_symbol(i0 ? Symbol::Faulty : Symbol::MaybeOk));
        if (i0) send_all(s, fwd, 0, Payload{Word{uint32_t(*i0), {}}});
        in = s.exchange();
        if (majority_reader(s, in, fwd, kControlSlot).symbol() == Symbol::Faulty) {
            auto idx = majority_vote(in, fwd, 0).value_or(Payload{});
            size_t j = idx.empty() ? 0 : std::min<size_t>(idx[0].v, u - 1);
            return recurse(k - 1, u - 1, without(fwd, h[j]), without(bwd, j));
        }
    }

    bool equal = true;
    for (const auto& x : mhat) equal = equal && x && mhat[0] && *x == *mhat[0];
    std::optional<FieldElement> out;
    if (equal) out = mhat[0];
    if (all_stop(s, bwd, equal)) return out;
    return r_phase(s, m, k, u, fwd, bwd, out, recurse);
}

// ---- perfect, 3k forward paths ----

std::optional<FieldElement> perfect_3k(Session& s, const FieldElement& m, size_t k)
{
    const FieldSpec& f = s.field();
    auto fwd = s.network().forward();
    auto bwd = s.network().backward();
    if (k < 1 || fwd.size() < 3 * k || bwd.empty()) throw PreconditionError("needs 3k forward and one backward path");
    fwd.resize(3 * k);
    const int q = bwd[0];
    const size_t n = fwd.size();
    const auto all = iota_n(n);

    auto sent = share_at(s, m, k, all);
    for (size_t i = 0; i < n; ++i) s.send(fwd[i], 0, pack({sent[i]}));
    auto in = s.exchange();

    std::vector<FieldElement> got;
    for (size_t i = 0; i < n; ++i) got.push_back(read(s, in, fwd[i]).elem());
    std::optional<FieldElement> out = correct_at(f, all, got, k, k - 1);
    if (out)
        s.send(q, kControlSlot, pack_symbol(Symbol::Stop));
    else
        s.send(q, 0, pack(got));
    in = s.exchange();

    auto report = lookup(in, q, 0);
    if (!report || report->size() != n) return out;
    Reader r(f, report);
    std::vector<bool> bad(n);
    for (size_t i = 0; i < n; ++i) bad[i] = r.elem() != sent[i];
    send_all(s, fwd, 0, bits(bad));
    in = s.exchange();
    if (out) return out;  // B ignores the late message
    Reader pr = majority_reader(s, in, fwd, 0);
    auto pb = read_bits(pr, n);
    std::vector<size_t> keep;
    std::vector<FieldElement> kv;
    for (size_t i = 0; i < n; ++i)
        if (!pb[i]) {
            keep.push_back(i);
            kv.push_back(got[i]);
        }
    if (keep.size() < k + 1) return std::nullopt;
    return interpolate_at(f, keep, kv, k);
}

// ---- perfect, efficient ----

std::optional<FieldElement> perfect_efficient_on(Session& s, const FieldElement& m, size_t k, size_t u,
                                                 std::vector<int> fwd, std::vector<int> bwd)
{
    const FieldSpec& f = s.field();
    if (u > k) throw PreconditionError("needs k >= u");
    const size_t n = 3 * k + 1 - u;
    if (fwd.size() < n || bwd.size() < u) throw PreconditionError("needs 3k+1-u forward and u backward paths");
    fwd.resize(n);
    bwd.resize(u);
    const auto all = iota_n(n);

    auto sent = share_at(s, m, k, all);
    for (size_t i = 0; i < n; ++i) s.send(fwd[i], 0, pack({sent[i]}));
    auto in = s.exchange();
    std::vector<FieldElement> got;
    for (size_t i = 0; i < n; ++i) got.push_back(read(s, in, fwd[i]).elem());
    std::optional<FieldElement> out = correct_at(f, all, got, k, k - u);
    if (u == 0) return out;

    require_majority(fwd, k);
    if (all_stop(s, bwd, out.has_value())) return out;
    Recurse recurse = [&](size_t k2, size_t u2, std::vector<int> f2, std::vector<int> b2) {
        return perfect_efficient_on(s, m, k2, u2, std::move(f2), std::move(b2));
    };
    return r_phase(s, m, k, u, fwd, bwd, out, recurse);
}

// ---- perfect with shared feedback nodes ----

struct SubA {
    std::vector<size_t> chan;  // positions in fwd
    FieldElement r0;
    std::vector<FieldElement> sent;
    bool done = false;
    int runs = 0;
};

struct SubB {
    std::vector<size_t> chan;
    std::vector<FieldElement> got;
    std::optional<FieldElement> r0, r1;
    bool asked_r0 = false;
    bool sent_ok = false;
    bool sent_continue = false;
    bool out = false;  // left the sub-protocol
    int runs = 0;
};

std::optional<FieldElement> perfect_shared_feedback(Session& s, const FieldElement& m, size_t k, size_t u)
{
    const FieldSpec& f = s.field();
    const Network& net = s.network();
    auto fwd = net.forward();
    auto bwd = net.backward();
    const size_t n = 3 * k + 1 - u;
    if (u < 1 || u > k || fwd.size() < n || bwd.size() < u)
        throw PreconditionError("needs 3k+1-u forward and u backward paths, 1 <= u <= k");
    fwd.resize(n);
    bwd.resize(u);
    require_majority(fwd, k);

    // Forward paths sharing no node with any backward path carry phase two.
    std::set<int> back_nodes;
    for (int q : bwd) back_nodes.insert(net.channels[q].carriers.begin(), net.channels[q].carriers.end());
    std::vector<int> clean_fwd;
    for (int c : fwd) {
        bool shared = false;
        for (int x : net.channels[c].carriers) shared = shared || back_nodes.count(x);
        if (!shared) clean_fwd.push_back(c);
    }
    if (clean_fwd.size() < 3 * k + 1 - 2 * u)
        throw PreconditionError("needs 3k+1-2u forward paths disjoint from the backward paths");
    clean_fwd.resize(3 * k + 1 - 2 * u);

    std::vector<SubA> sa(u);
    std::vector<SubB> sb(u);
    for (size_t j = 0; j < u; ++j) sa[j].chan = sb[j].chan = iota_n(n);
    std::optional<FieldElement> out;
    size_t ba_bad = 0;
    const int max_runs = int(n) + 2;
    auto data_slot = [](size_t j) { return int(2 * j); };
    auto ctl_slot = [](size_t j) { return kControlSlot + int(j); };

    // A's share transfer and B's reception; `second` selects R1.
    auto send_shares = [&](bool second) {
        for (size_t j = 0; j < u; ++j) {
            SubA& a = sa[j];
            if (a.done) continue;
            FieldElement value = second ? m - a.r0 : (a.r0 = s.coins().draw());
            a.sent = share_at(s, value, k, a.chan);
            for (size_t x = 0; x < a.chan.size(); ++x) s.send(fwd[a.chan[x]], data_slot(j), pack({a.sent[x]}));
        }
        return s.exchange();
    };
    auto receive_shares = [&](const Inbox& in, size_t j) {
        SubB& b = sb[j];
        b.got.clear();
        for (size_t p : b.chan) b.got.push_back(read(s, in, fwd[p], data_slot(j)).elem());
    };
    // A's handling of q_j's answer; returns the symbol A relays or None
    // when it relays a share report.
    auto a_answer = [&](const Inbox& in, size_t j) -> Symbol {
        SubA& a = sa[j];
        auto ctl = lookup(in, bwd[j], ctl_slot(j));
        auto data = lookup(in, bwd[j], data_slot(j));
        Symbol sym = ctl && !data ? Reader(f, ctl).symbol() : Symbol::None;
        if (sym == Symbol::Ok || sym == Symbol::Continue) {
            send_all(s, fwd, ctl_slot(j), pack_symbol(sym));
            return sym;
        }
        Reader r(f, data);
        auto echoed = r.elems(a.chan.size());
        std::vector<bool> bad(n, false);
        std::vector<size_t> keep;
        for (size_t x = 0; x < a.chan.size(); ++x) {
            if (echoed[x] != a.sent[x])
                bad[a.chan[x]] = true;
            else
                keep.push_back(a.chan[x]);
        }
        send_all(s, fwd, data_slot(j), cat(pack(echoed), bits(bad)));
        a.chan = keep;
        return Symbol::None;
    };
    // B reads A's relay. Returns the shares B may use or nullopt when q_j
    // proved faulty.
    auto b_relay = [&](const Inbox& in, size_t j, bool b_sent_shares) -> std::optional<std::vector<size_t>> {
        SubB& b = sb[j];
        auto rel = majority_vote(in, fwd, data_slot(j));
        if (!rel || !b_sent_shares) return std::nullopt;
        Reader r(f, rel);
        auto echoed = r.elems(b.chan.size());
        auto bad = read_bits(r, n);
        if (!same_values(pack(echoed), pack(b.got))) return std::nullopt;
        std::vector<size_t> keep;
        for (size_t p : b.chan)
            if (!bad[p]) keep.push_back(p);
        return keep;
    };
    auto values_at = [&](const SubB& b, const std::vector<size_t>& keep) {
        std::vector<FieldElement> v;
        for (size_t p : keep) {
            auto it = std::find(b.chan.begin(), b.chan.end(), p);
            v.push_back(b.got[size_t(it - b.chan.begin())]);
        }
        return v;
    };
    auto mark_bad = [&](size_t j) {
        if (!sb[j].out) {
            sb[j].out = true;
            ++ba_bad;
        }
    };

    bool any_active = true;
    while (any_active) {
        // R0 transfer.
        auto in = send_shares(false);
        for (size_t j = 0; j < u; ++j) {
            SubB& b = sb[j];
            if (b.out) continue;
            receive_shares(in, j);
            b.r0 = b.runs == 0 ? correct_at(f, b.chan, b.got, k, k - u) : clean_at(f, b.chan, b.got, k);
            b.asked_r0 = !b.r0;
            if (b.r0)
                s.send(bwd[j], ctl_slot(j), pack_symbol(Symbol::Ok));
            else
                s.send(bwd[j], data_slot(j), pack(b.got));
        }
        in = s.exchange();
        std::vector<Symbol> relayed(u, Symbol::None);
        for (size_t j = 0; j < u; ++j)
            if (!sa[j].done) relayed[j] = a_answer(in, j);
        in = s.exchange();
        for (size_t j = 0; j < u; ++j) {
            SubB& b = sb[j];
            if (b.out) continue;
            Symbol sym = majority_reader(s, in, fwd, ctl_slot(j)).symbol();
            if (sym == Symbol::Ok) {
                if (b.asked_r0) mark_bad(j);
            } else if (auto keep = b_relay(in, j, b.asked_r0)) {
                auto v = values_at(b, *keep);
                b.chan = *keep;
                b.got = v;
                if (keep->size() > k)
                    b.r0 = interpolate_at(f, *keep, v, k);
                else
                    mark_bad(j);
            } else {
                mark_bad(j);
            }
        }

        // R1 transfer.
        in = send_shares(true);
        for (size_t j = 0; j < u; ++j) {
            SubB& b = sb[j];
            b.sent_ok = b.sent_continue = false;
            if (b.out) continue;
            receive_shares(in, j);
            b.r1 = clean_at(f, b.chan, b.got, k);
            if (b.r1) {
                b.sent_ok = true;
                s.send(bwd[j], ctl_slot(j), pack_symbol(Symbol::Ok));
            } else if (b.asked_r0) {
                b.sent_continue = true;
                s.send(bwd[j], ctl_slot(j), pack_symbol(Symbol::Continue));
            } else {
                s.send(bwd[j], data_slot(j), pack(b.got));
            }
        }
        in = s.exchange();
        for (size_t j = 0; j < u; ++j) {
            if (sa[j].done) continue;
            relayed[j] = a_answer(in, j);
            if (relayed[j] == Symbol::Continue && ++sa[j].runs < max_runs) continue;
            sa[j].done = true;
        }
        in = s.exchange();
        for (size_t j = 0; j < u; ++j) {
            SubB& b = sb[j];
            if (b.out) continue;
            Symbol sym = majority_reader(s, in, fwd, ctl_slot(j)).symbol();
            if (sym == Symbol::Ok) {
                if (b.sent_ok && b.r0) {
                    settle(out, *b.r0 + *b.r1);
                    b.out = true;
                } else {
                    mark_bad(j);
                }
            } else if (sym == Symbol::Continue) {
                if (b.sent_continue && ++b.runs < max_runs)
                    continue;
                mark_bad(j);
            } else if (auto keep = b_relay(in, j, !b.sent_ok && !b.sent_continue)) {
                auto v = values_at(b, *keep);
                if (keep->size() > k && b.r0) {
                    settle(out, *b.r0 + interpolate_at(f, *keep, v, k));
                    b.out = true;
                } else {
                    mark_bad(j);
                }
            } else {
                mark_bad(j);
            }
        }
        any_active = false;
        for (size_t j = 0; j < u; ++j) any_active = any_active || !sa[j].done;
    }

    // Phase two.
    const size_t n2 = clean_fwd.size();
    auto sh = share_at(s, m, k, iota_n(n2));
    for (size_t i = 0; i < n2; ++i) s.send(clean_fwd[i], 0, pack({sh[i]}));
    auto in = s.exchange();
    if (!out && ba_bad == u) {
        std::vector<FieldElement> got;
        for (size_t i = 0; i < n2; ++i) got.push_back(read(s, in, clean_fwd[i]).elem());
        out = correct_at(f, iota_n(n2), got, k, k - u);
    }
    return out;
}

// ---- hypergraphs ----

std::optional<FieldElement> hypergraph_reliable(Session& s, const FieldElement& m, size_t k)
{
    auto fwd = s.network().forward();
    require_majority(fwd, k);
    send_all(s, fwd, 0, pack({m}));
    auto in = s.exchange();
    return majority_reader(s, in, fwd, 0).elem();
}

std::vector<int> link_channels(const Network& net)
{
    std::vector<int> out;
    for (size_t i = 0; i < net.channels.size(); ++i)
        if (net.channels[i].dir == Direction::Link) out.push_back(int(i));
    return out;
}

std::optional<FieldElement> hypergraph_0delta(Session& s, const FieldElement& m, size_t k)
{
    const FieldSpec& f = s.field();
    auto witness = link_channels(s.network());
    auto fwd = s.network().forward();
    auto bwd = s.network().backward();
    require_majority(fwd, k);
    require_majority(bwd, k);
    const size_t t = witness.size();

    std::vector<LinearKey> ka;
    for (size_t i = 0; i < t; ++i) {
        ka.push_back({s.coins().draw(), s.coins().draw()});
        s.send(witness[i], 0, pack({ka[i].a, ka[i].b}));
    }
    auto in = s.exchange();
    std::vector<LinearKey> kb;
    Payload challenge;
    for (size_t i = 0; i < t; ++i) {
        Reader r = read(s, in, witness[i]);
        kb.push_back({r.elem(), r.elem()});
    }
    for (size_t i = 0; i < t; ++i) {
        FieldElement r = s.coins().draw();
        challenge = cat(challenge, pack({r, auth_linear(r, kb[i]).value}));
    }
    send_all(s, bwd, 0, challenge);
    in = s.exchange();

    Reader cr = majority_reader(s, in, bwd, 0);
    std::vector<bool> index(t, false);
    FieldElement key = f.zero();
    for (size_t i = 0; i < t; ++i) {
        FieldElement r = cr.elem(), tag = cr.elem();
        if (verify(r, AuthTag{tag}, ka[i])) {
            index[i] = true;
            key += ka[i].a;
        }
    }
    send_all(s, fwd, 0, cat(bits(index), pack({m + key})));
    in = s.exchange();

    Reader dr = majority_reader(s, in, fwd, 0);
    auto got = read_bits(dr, t);
    FieldElement c = dr.elem();
    FieldElement kbsum = f.zero();
    for (size_t i = 0; i < t; ++i)
        if (got[i]) kbsum += kb[i].a;
    return c - kbsum;
}

// ---- fig2 neighbor network ----
// Channel order: A*, B*, C*, D*, ideal B->A, ideal A->B.

std::optional<FieldElement> neighbor_exforwd(Session& s, const FieldElement& m)
{
    const FieldSpec& f = s.field();
    const int a_star = 0, b_star = 1, c_star = 2, d_star = 3, rel_ba = 4, rel_ab = 5;
    if (s.network().channels.size() != 6) throw PreconditionError("needs the fig2 channel layout");

    // Steps 1-2.
    auto ra = std::vector<FieldElement>{s.coins().draw(), s.coins().draw(), s.coins().draw(), s.coins().draw()};
    auto rb = std::vector<FieldElement>{s.coins().draw(), s.coins().draw(), s.coins().draw(), s.coins().draw()};
    s.send(a_star, 0, pack(ra));
    s.send(b_star, 0, pack(rb));
    auto in = s.exchange();

    // Steps 3-4. C uses pads 1,2 and D pads 3,4 from each endpoint.
    auto rac = read(s, in, a_star).elems(4);
    auto rbc = read(s, in, b_star).elems(4);
    for (int node = 0; node < 2; ++node) {
        FieldElement a = s.coins().draw(), b = s.coins().draw();
        const size_t o = 2 * size_t(node);
        s.send(node == 0 ? c_star : d_star, 0,
               pack({a + rac[o], b + rac[o + 1], a + rbc[o], b + rbc[o + 1]}));
    }
    in = s.exchange();

    // Steps 5-7.
    LinearKey ka[2], kb[2];
    for (int node = 0; node < 2; ++node) {
        auto x = read(s, in, node == 0 ? c_star : d_star).elems(4);
        const size_t o = 2 * size_t(node);
        ka[node] = {x[0] - ra[o], x[1] - ra[o + 1]};
        kb[node] = {x[2] - rb[o], x[3] - rb[o + 1]};
    }
    FieldElement r = s.coins().draw();
    s.send(rel_ba, 0, pack({r, auth_linear(r, kb[0]).value, auth_linear(r, kb[1]).value}));
    in = s.exchange();

    // Steps 8-9.
    auto challenge = lookup(in, rel_ba);
    if (!challenge) return std::nullopt;  // the reliable channel failed
    Reader cr(f, challenge);
    FieldElement ra_ = cr.elem(), s1 = cr.elem(), s2 = cr.elem();
    std::vector<bool> index{verify(ra_, AuthTag{s1}, ka[0]), verify(ra_, AuthTag{s2}, ka[1])};
    FieldElement key = f.zero();
    for (int i = 0; i < 2; ++i)
        if (index[i]) key += ka[i].a;
    s.send(rel_ab, 0, cat(bits(index), pack({m + key})));
    in = s.exchange();

    // Step 10.
    auto last = lookup(in, rel_ab);
    if (!last) return std::nullopt;
    Reader dr(f, last);
    auto got = read_bits(dr, 2);
    FieldElement c = dr.elem();
    FieldElement kbsum = f.zero();
    for (int i = 0; i < 2; ++i)
        if (got[i]) kbsum += kb[i].a;
    return c - kbsum;
}

// ---- networks from topologies ----

struct Compact {
    std::vector<int> node_of;
    std::vector<std::string> names;
};

Compact compact_nodes(const NodeNames& nodes, int sender, int receiver)
{
    Compact c;
    c.node_of.assign(nodes.size(), -1);
    for (int v = 0; v < int(nodes.size()); ++v) {
        if (v == sender || v == receiver) continue;
        c.node_of[v] = int(c.names.size());
        c.names.push_back(nodes.names[v]);
    }
    return c;
}

NodeSet map_nodes(const NodeSet& xs, const std::vector<int>& node_of)
{
    NodeSet out;
    for (int x : xs)
        if (node_of[x] >= 0) out.push_back(node_of[x]);
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

Digraph reversed_roles(Digraph g)
{
    std::swap(g.sender, g.receiver);
    return g;
}

Digraph without_nodes(Digraph g, const std::set<int>& drop)
{
    std::vector<std::pair<int, int>> kept;
    for (auto e : g.edges)
        if (!drop.count(e.first) && !drop.count(e.second)) kept.push_back(e);
    g.edges = kept;
    return g;
}

Network digraph_network(const Digraph& g, size_t nf, size_t nb, bool shared_ok, size_t clean_needed)
{
    g.validate();
    Compact c = compact_nodes(g.nodes, g.sender, g.receiver);
    PathSet fwd = max_disjoint_paths(g);
    if (fwd.size() < nf)
        throw PreconditionError("topology has " + std::to_string(fwd.size()) + " disjoint forward paths, need " +
                                std::to_string(nf));
    fwd.paths.resize(nf);
    std::set<int> used;
    for (size_t i = 0; i < nf; ++i)
        for (int v : fwd.internal_nodes(i)) used.insert(v);
    PathSet bwd;
    if (nb > 0) {
        bwd = max_disjoint_paths(shared_ok ? reversed_roles(g) : without_nodes(reversed_roles(g), used));
        if (bwd.size() < nb)
            throw PreconditionError("topology has " + std::to_string(bwd.size()) +
                                    " usable backward paths, need " + std::to_string(nb));
        bwd.paths.resize(nb);
    }
    Network net;
    net.node_names = c.names;
    std::set<int> back_nodes;
    for (size_t j = 0; j < nb; ++j)
        for (int v : bwd.internal_nodes(j)) back_nodes.insert(v);
    // Paths clear of the feedback paths first, so phase-two selection and
    // truncation keep them.
    std::vector<size_t> order(nf);
    std::iota(order.begin(), order.end(), size_t(0));
    std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) {
        auto touches = [&](size_t i) {
            for (int v : fwd.internal_nodes(i))
                if (back_nodes.count(v)) return true;
            return false;
        };
        return !touches(a) && touches(b);
    });
    size_t clean = 0;
    for (size_t x = 0; x < nf; ++x) {
        const size_t i = order[x];
        bool touches = false;
        for (int v : fwd.internal_nodes(i)) touches = touches || back_nodes.count(v);
        if (!touches) ++clean;
        net.channels.push_back({Direction::AB, int(x), "p" + std::to_string(x + 1),
                                map_nodes(fwd.internal_nodes(i), c.node_of), {}, false, 0.0});
    }
    if (clean < clean_needed)
        throw PreconditionError("only " + std::to_string(clean) + " forward paths avoid the backward paths, need " +
                                std::to_string(clean_needed));
    for (size_t j = 0; j < nb; ++j)
        net.channels.push_back({Direction::BA, int(j), "q" + std::to_string(j + 1),
                                map_nodes(bwd.internal_nodes(j), c.node_of), {}, false, 0.0});
    for (const auto& ch : net.channels)
        if (ch.carriers.empty())
            throw PreconditionError("a direct sender-receiver edge is not a corruptible path");
    return net;
}

// BFS path from `from` to `to` using only hyperedges that avoid `removed`.
std::optional<std::vector<int>> hyper_path(const Hypergraph& h, int from, int to, const std::set<int>& removed)
{
    const int n = int(h.nodes.size());
    std::vector<int> prev(n, -2);
    std::vector<int> queue{from};
    prev[from] = -1;
    for (size_t qi = 0; qi < queue.size(); ++qi) {
        int x = queue[qi];
        std::vector<int> next;
        for (const auto& e : h.hyperedges) {
            if (e.from != x || removed.count(e.from)) continue;
            bool touches = false;
            for (int y : e.to) touches = touches || removed.count(y);
            if (touches) continue;
            next.insert(next.end(), e.to.begin(), e.to.end());
        }
        std::sort(next.begin(), next.end());
        for (int y : next) {
            if (prev[y] != -2) continue;
            prev[y] = x;
            queue.push_back(y);
        }
    }
    if (prev[to] == -2) return std::nullopt;
    std::vector<int> path;
    for (int v = to; v != -1; v = prev[v]) path.push_back(v);
    std::reverse(path.begin(), path.end());
    return path;
}

Hypergraph hyper_reversed(Hypergraph h)
{
    std::swap(h.sender, h.receiver);
    return h;
}

Network hypergraph_network(const Hypergraph& h, size_t k, bool need_back, bool need_witness)
{
    h.validate();
    Compact c = compact_nodes(h.nodes, h.sender, h.receiver);
    Network net;
    net.node_names = c.names;
    auto check_sep = [&](const Hypergraph& g, const char* dir) {
        auto sep = is_k_separable(g, 2 * k);
        if (sep.separable)
            throw PreconditionError(std::string(dir) + " is " + std::to_string(2 * k) + "-separable");
    };
    check_sep(h, "sender->receiver");
    if (need_back) check_sep(hyper_reversed(h), "receiver->sender");

    if (need_witness) {
        std::vector<int> internal;
        for (int v = 0; v < int(h.nodes.size()); ++v)
            if (v != h.sender && v != h.receiver) internal.push_back(v);
        if (internal.size() < k) throw PreconditionError("fewer internal nodes than k");
        int idx = 0;
        for (const auto& sub : k_subsets(internal.size(), k)) {
            std::set<int> removed;
            for (size_t i : sub) removed.insert(internal[i]);
            auto p = hyper_path(h, h.sender, h.receiver, removed);
            if (!p)
                throw PreconditionError("no sender->receiver path avoids a " + std::to_string(k) +
                                        "-node set (needs strong (k+1)-connectivity)");
            Channel ch = hyperpath_channel(h, *p, c.node_of, Direction::Link, idx);
            std::string label = "S{";
            for (size_t i = 0; i < sub.size(); ++i) label += (i ? "," : "") + h.nodes.names[internal[sub[i]]];
            ch.label = label + "}";
            net.channels.push_back(ch);
            ++idx;
        }
    }
    PathSet fwd = max_disjoint_paths(h);
    for (size_t i = 0; i < std::min(fwd.size(), 2 * k + 1); ++i)
        net.channels.push_back(hyperpath_channel(h, fwd.paths[i], c.node_of, Direction::AB, int(i)));
    if (need_back) {
        PathSet bwd = max_disjoint_paths(hyper_reversed(h));
        for (size_t i = 0; i < std::min(bwd.size(), 2 * k + 1); ++i)
            net.channels.push_back(hyperpath_channel(h, bwd.paths[i], c.node_of, Direction::BA, int(i)));
    }
    return net;
}

Network fig2_network(const NeighborNet& g, double delta_r)
{
    g.validate();
    // Match against fig2 with A, B fixed: find C, D, F.
    const Topology ref = fixture("fig2");
    const NeighborNet& r = ref.neighbor;
    std::vector<int> internal;
    for (int v = 0; v < int(g.nodes.size()); ++v)
        if (v != g.sender && v != g.receiver) internal.push_back(v);
    if (g.nodes.size() != r.nodes.size() || g.edges.size() != r.edges.size())
        throw PreconditionError("topology is not isomorphic to fig2");
    auto has = [&](int x, int y) {
        for (auto e : g.edges)
            if ((e.first == x && e.second == y) || (e.first == y && e.second == x)) return true;
        return false;
    };
    std::vector<int> perm = internal;
    std::sort(perm.begin(), perm.end());
    std::optional<std::vector<int>> found;
    do {
        std::vector<int> map(r.nodes.size(), -1);
        map[r.sender] = g.sender;
        map[r.receiver] = g.receiver;
        int slot = 0;
        for (int v = 0; v < int(r.nodes.size()); ++v)
            if (v != r.sender && v != r.receiver) map[v] = perm[size_t(slot++)];
        bool ok = true;
        for (auto e : r.edges) ok = ok && has(map[e.first], map[e.second]);
        if (ok) {
            found = map;
            break;
        }
    } while (std::next_permutation(perm.begin(), perm.end()));
    if (!found) throw PreconditionError("topology is not isomorphic to fig2");

    const auto& map = *found;
    Compact c = compact_nodes(g.nodes, g.sender, g.receiver);
    auto adj = g.adjacency();
    auto hears = [&](int v) { return map_nodes(adj[v], c.node_of); };
    const int C = map[r.nodes.index("C")], D = map[r.nodes.index("D")];
    Network net;
    net.node_names = c.names;
    auto drop_self = [&](NodeSet s, int v) {
        s.erase(std::remove(s.begin(), s.end(), c.node_of[v]), s.end());
        return s;
    };
    net.channels.push_back({Direction::Link, 0, "A*", {}, hears(g.sender), false, 0.0});
    net.channels.push_back({Direction::Link, 1, "B*", {}, hears(g.receiver), false, 0.0});
    net.channels.push_back({Direction::Link, 2, "C*", {c.node_of[C]}, drop_self(hears(C), C), false, 0.0});
    net.channels.push_back({Direction::Link, 3, "D*", {c.node_of[D]}, drop_self(hears(D), D), false, 0.0});
    net.channels.push_back({Direction::BA, 0, "reliable B->A", {}, {}, true, delta_r});
    net.channels.push_back({Direction::AB, 0, "reliable A->B", {}, {}, true, delta_r});
    return net;
}

// ---- registry ----

void need_k(const ProtocolParams& p, size_t min_k)
{
    if (p.k < min_k) throw PreconditionError("needs k >= " + std::to_string(min_k));
}

void need_u(const ProtocolParams& p)
{
    if (p.u < 1 || p.u > p.k) throw PreconditionError("needs 1 <= u <= k");
}

uint64_t binom(uint64_t n, uint64_t r)
{
    uint64_t c = 1;
    for (uint64_t i = 1; i <= r; ++i) c = c * (n - r + i) / i;
    return c;
}

std::vector<ProtocolDescriptor> build_registry()
{
    std::vector<ProtocolDescriptor> r;
    auto add = [&](ProtocolDescriptor d) { r.push_back(std::move(d)); };

    add({"oneway_0delta", "2k+1 forward paths, no feedback; shares with pairwise tags",
         Reliability::Probabilistic, TopologyNeed::DisjointPaths, false,
         [](const ProtocolParams& p) { return std::pair<size_t, size_t>{2 * p.k + 1, 0}; },
         [](const ProtocolParams& p) { return std::optional<int>(int(2 * p.k + 1)); },
         [](const ProtocolParams& p) -> ProtocolBody {
             return [k = p.k](Session& s, const FieldElement& m) { return oneway_0delta(s, m, k); };
         }});
    add({"k1_feedback", "k = 1 over two forward paths and one backward path", Reliability::Probabilistic,
         TopologyNeed::DisjointPaths, false,
         [](const ProtocolParams& p) {
             if (p.k != 1) throw PreconditionError("k1_feedback is defined for k = 1 only");
             return std::pair<size_t, size_t>{2, 1};
         },
         [](const ProtocolParams&) { return std::optional<int>(3); },
         [](const ProtocolParams&) -> ProtocolBody { return k1_feedback; }});
    add({"subset_enum_0delta", "one round per (k+1)-subset of all paths", Reliability::Probabilistic,
         TopologyNeed::DisjointPaths, true,
         [](const ProtocolParams& p) {
             need_k(p, 1);
             need_u(p);
             return std::pair<size_t, size_t>{2 * p.k + 1 - p.u, p.u};
         },
         [](const ProtocolParams& p) { return std::optional<int>(int(3 * binom(2 * p.k + 1, p.k + 1))); },
         [](const ProtocolParams& p) -> ProtocolBody {
             return [k = p.k, u = p.u](Session& s, const FieldElement& m) { return subset_enum_0delta(s, m, k, u); };
         }});
    add({"efficient_0delta", "tagged shares, then quadratic-key feedback classes", Reliability::Probabilistic,
         TopologyNeed::DisjointPaths, true,
         [](const ProtocolParams& p) {
             need_k(p, 1);
             need_u(p);
             return std::pair<size_t, size_t>{2 * p.k + 1 - p.u, p.u};
         },
         [](const ProtocolParams& p) { return std::optional<int>(int(2 * p.k + 2 + p.u)); },
         [](const ProtocolParams& p) -> ProtocolBody {
             return [k = p.k, u = p.u](Session& s, const FieldElement& m) { return efficient_0delta(s, m, k, u); };
         }});
    add({"perfect_u1", "3k-1 forward paths and one echo path", Reliability::Perfect, TopologyNeed::DisjointPaths,
         false,
         [](const ProtocolParams& p) {
             need_k(p, 2);
             return std::pair<size_t, size_t>{3 * p.k - 1, 1};
         },
         [](const ProtocolParams& p) { return std::optional<int>(int(3 * (3 * p.k - 1) + 2)); },
         [](const ProtocolParams& p) -> ProtocolBody {
             return [k = p.k](Session& s, const FieldElement& m) { return perfect_u1(s, m, k); };
         }});
    add({"perfect_recursive", "ordered u-subset echoes with recursion on k-1, u-1", Reliability::Perfect,
         TopologyNeed::DisjointPaths, true,
         [](const ProtocolParams& p) {
             need_k(p, 2);
             need_u(p);
             size_t nb = (p.u == 1 || p.k == 2) ? 1 : p.u;
             return std::pair<size_t, size_t>{recursive_paths(p.k, p.u), nb};
         },
         [](const ProtocolParams&) { return std::optional<int>(); },
         [](const ProtocolParams& p) -> ProtocolBody {
             return [k = p.k, u = p.u](Session& s, const FieldElement& m) {
                 return perfect_recursive_on(s, m, k, u, s.network().forward(), s.network().backward());
             };
         }});
    add({"perfect_3k", "3k forward paths and one backward path, any k", Reliability::Perfect,
         TopologyNeed::DisjointPaths, false,
         [](const ProtocolParams& p) {
             need_k(p, 1);
             return std::pair<size_t, size_t>{3 * p.k, 1};
         },
         [](const ProtocolParams&) { return std::optional<int>(3); },
         [](const ProtocolParams& p) -> ProtocolBody {
             return [k = p.k](Session& s, const FieldElement& m) { return perfect_3k(s, m, k); };
         }});
    add({"perfect_efficient", "one correct/detect round, then the R1/R2 fallback", Reliability::Perfect,
         TopologyNeed::DisjointPaths, true,
         [](const ProtocolParams& p) {
             need_k(p, 1);
             need_u(p);
             return std::pair<size_t, size_t>{3 * p.k + 1 - p.u, p.u};
         },
         [](const ProtocolParams& p) { return std::optional<int>(int(11 * p.u)); },
         [](const ProtocolParams& p) -> ProtocolBody {
             return [k = p.k, u = p.u](Session& s, const FieldElement& m) {
                 return perfect_efficient_on(s, m, k, u, s.network().forward(), s.network().backward());
             };
         }});
    add({"perfect_shared_feedback", "u concurrent sub-protocols plus a disjoint-path phase two",
         Reliability::Perfect, TopologyNeed::SharedPaths, true,
         [](const ProtocolParams& p) {
             need_k(p, 1);
             need_u(p);
             return std::pair<size_t, size_t>{3 * p.k + 1 - p.u, p.u};
         },
         [](const ProtocolParams&) { return std::optional<int>(); },
         [](const ProtocolParams& p) -> ProtocolBody {
             return [k = p.k, u = p.u](Session& s, const FieldElement& m) {
                 return perfect_shared_feedback(s, m, k, u);
             };
         }});
    add({"hypergraph_reliable", "majority over 2k+1 disjoint hyperpaths", Reliability::Perfect,
         TopologyNeed::Hypergraph, false, nullptr,
         [](const ProtocolParams&) { return std::optional<int>(1); },
         [](const ProtocolParams& p) -> ProtocolBody {
             return [k = p.k](Session& s, const FieldElement& m) { return hypergraph_reliable(s, m, k); };
         }});
    r.back().claims_privacy = false;
    add({"hypergraph_0delta", "key pairs on witness paths, reliable challenge and pad", Reliability::Probabilistic,
         TopologyNeed::Hypergraph, false, nullptr,
         [](const ProtocolParams&) { return std::optional<int>(3); },
         [](const ProtocolParams& p) -> ProtocolBody {
             return [k = p.k](Session& s, const FieldElement& m) { return hypergraph_0delta(s, m, k); };
         }});
    add({"neighbor_exforwd", "the fig2 neighbor-network protocol, k = 1", Reliability::Probabilistic,
         TopologyNeed::Fig2Neighbor, false, nullptr,
         [](const ProtocolParams&) { return std::optional<int>(4); },
         [](const ProtocolParams&) -> ProtocolBody { return neighbor_exforwd; }});
    return r;
}

}  // namespace

Channel hyperpath_channel(const Hypergraph& h, const std::vector<int>& path, const std::vector<int>& node_of,
                          Direction dir, int index)
{
    Channel ch;
    ch.dir = dir;
    ch.index = index;
    std::string label;
    NodeSet internal, heard;
    for (size_t i = 0; i < path.size(); ++i) {
        label += (i ? ">" : "") + h.nodes.names[path[i]];
        if (i > 0 && i + 1 < path.size()) internal.push_back(path[i]);
        if (i + 1 == path.size()) break;
        // First hyperedge from path[i] that reaches path[i+1].
        for (const auto& e : h.hyperedges)
            if (e.from == path[i] && std::binary_search(e.to.begin(), e.to.end(), path[i + 1])) {
                heard.insert(heard.end(), e.to.begin(), e.to.end());
                break;
            }
    }
    ch.label = label;
    ch.carriers = map_nodes(internal, node_of);
    NodeSet obs = map_nodes(heard, node_of);
    for (int x : obs)
        if (!std::binary_search(ch.carriers.begin(), ch.carriers.end(), x)) ch.observers.push_back(x);
    return ch;
}

Hypergraph relay_hypergraph(size_t k)
{
    Hypergraph h;
    h.nodes.add("A");
    h.nodes.add("B");
    const int a = 0, b = 1;
    for (size_t i = 0; i < 2 * k + 1; ++i) {
        int x = h.nodes.add("x" + std::to_string(i + 1));
        int y = h.nodes.add("y" + std::to_string(i + 1));
        h.hyperedges.push_back({a, {x}});
        h.hyperedges.push_back({x, {b}});
        h.hyperedges.push_back({b, {y}});
        h.hyperedges.push_back({y, {a}});
    }
    h.sender = a;
    h.receiver = b;
    h.validate();
    return h;
}

const std::vector<ProtocolDescriptor>& protocol_registry()
{
    static const std::vector<ProtocolDescriptor> r = build_registry();
    return r;
}

const ProtocolDescriptor& protocol(const std::string& id)
{
    for (const auto& d : protocol_registry())
        if (d.id == id) return d;
    throw ParamError("unknown protocol '" + id + "'");
}

Instance prepare_on(const std::string& id, const ProtocolParams& params, Network network)
{
    Instance inst;
    inst.descriptor = &protocol(id);
    inst.params = params;
    if (inst.descriptor->paths) inst.descriptor->paths(params);
    inst.network = std::move(network);
    inst.body = inst.descriptor->body(params);
    inst.precondition = "ok";
    return inst;
}

Instance prepare(const std::string& id, const ProtocolParams& params)
{
    const auto& d = protocol(id);
    switch (d.need) {
    case TopologyNeed::DisjointPaths: {
        auto [nf, nb] = d.paths(params);
        return prepare_on(id, params, path_network(nf, nb));
    }
    case TopologyNeed::SharedPaths: {
        auto [nf, nb] = d.paths(params);
        return prepare_on(id, params, shared_path_network(nf, nb, nb));
    }
    case TopologyNeed::Hypergraph: {
        Topology t;
        t.kind = TopologyKind::Hypergraph;
        t.hypergraph = relay_hypergraph(params.k);
        return prepare(id, params, t);
    }
    case TopologyNeed::Fig2Neighbor:
        return prepare(id, params, fixture("fig2"));
    }
    throw ParamError("unhandled topology need");
}

Instance prepare(const std::string& id, const ProtocolParams& params, const Topology& topology)
{
    const auto& d = protocol(id);
    switch (d.need) {
    case TopologyNeed::DisjointPaths:
    case TopologyNeed::SharedPaths: {
        if (topology.kind != TopologyKind::Digraph)
            throw PreconditionError(id + " runs on directed graphs");
        auto [nf, nb] = d.paths(params);
        const bool shared = d.need == TopologyNeed::SharedPaths;
        size_t clean = shared ? 3 * params.k + 1 - 2 * params.u : 0;
        return prepare_on(id, params, digraph_network(topology.digraph, nf, nb, shared, clean));
    }
    case TopologyNeed::Hypergraph: {
        Hypergraph h;
        if (topology.kind == TopologyKind::Hypergraph)
            h = topology.hypergraph;
        else if (topology.kind == TopologyKind::Neighbor)
            h = to_hypergraph(topology.neighbor);
        else
            throw PreconditionError(id + " runs on hypergraphs or neighbor networks");
        const bool zero_delta = id == "hypergraph_0delta";
        return prepare_on(id, params, hypergraph_network(h, params.k, zero_delta, zero_delta));
    }
    case TopologyNeed::Fig2Neighbor:
        if (params.k != 1) throw PreconditionError("neighbor_exforwd is defined for k = 1");
        if (topology.kind != TopologyKind::Neighbor) throw PreconditionError("neighbor_exforwd needs fig2");
        return prepare_on(id, params, fig2_network(topology.neighbor, params.delta_r));
    }
    throw ParamError("unhandled topology need");
}

Outcome run(const Instance& inst, const AdversarySpec& adv, const FieldElement& message, const Seeds& seeds)
{
    return execute(inst.body, inst.network, inst.params.k, inst.params.u, adv, message, seeds);
}

// ---- scripted adversaries ----

namespace {

class Scripted : public Strategy {
public:
    Scripted(Script s, int from) : script_(s), from_(from) {}

    void on_round(RoundControl& rc) override
    {
        const Network& net = rc.session->network();
        const FieldSpec& f = rc.session->field();
        const uint64_t q = f.order();
        if (rc.round == 1)
            for (auto& [key, p] : *rc.controlled)
                if (p) first_[key] = *p;
        if (rc.round < from_) return;
        for (auto& [key, p] : *rc.controlled) {
            const Direction dir = net.channels[key.channel].dir;
            const bool ctl = key.slot >= kControlSlot;
            switch (script_) {
            case Script::Silent:
                p.reset();
                break;
            case Script::EchoForger:
                if (p && dir == Direction::BA && !ctl)
                    for (Word& w : *p) w = Word{f.add(w.v % uint32_t(q), 1), {}};
                break;
            case Script::ShareFlipper:
                if (p && dir != Direction::BA && !ctl) {
                    uint32_t d = uint32_t(1 + rc.rng->below(q - 1));
                    for (Word& w : *p) w = Word{f.add(w.v % uint32_t(q), d), {}};
                }
                break;
            case Script::StopForger:
                if (p && dir == Direction::BA && ctl) {
                    uint32_t v = (*p)[0].v;
                    (*p)[0].v = v == uint32_t(Symbol::Stop) ? uint32_t(Symbol::Continue)
                                : v == uint32_t(Symbol::Ok) ? uint32_t(Symbol::Continue)
                                                            : uint32_t(Symbol::Stop);
                }
                break;
            case Script::FormatCorruptor:
                if (p && !p->empty()) {
                    if (rc.rng->coin())
                        p->pop_back();
                    else
                        (*p)[rc.rng->below(p->size())].v = uint32_t(std::min<uint64_t>(q, 0xFFFFFFFFu));
                }
                break;
            case Script::ClassSplitter:
                if (p && dir == Direction::BA && !ctl)
                    for (Word& w : *p) w = Word{uint32_t(rc.rng->below(q)), {}};
                break;
            case Script::Replay:
                if (auto it = first_.find(key); it != first_.end()) p = it->second;
                break;
            case Script::Tamper:
                if (p && rc.rng->coin())
                    for (Word& w : *p) w = Word{uint32_t(ctl ? rc.rng->below(7) : rc.rng->below(q)), {}};
                break;
            }
        }
        // Stop-forging also injects where the honest party sent nothing.
        if (script_ == Script::StopForger)
            for (size_t c = 0; c < net.channels.size(); ++c)
                if (net.channels[c].dir == Direction::BA && rc.controls(int(c))) {
                    ChannelKey key{int(c), kControlSlot};
                    if (!rc.controlled->count(key)) (*rc.controlled)[key] = pack_symbol(Symbol::Stop);
                }
    }

private:
    Script script_;
    int from_;
    std::map<ChannelKey, Payload> first_;
};

}  // namespace

std::vector<Script> all_scripts()
{
    return {Script::Silent,          Script::EchoForger,    Script::ShareFlipper, Script::StopForger,
            Script::FormatCorruptor, Script::ClassSplitter, Script::Replay,       Script::Tamper};
}

std::string script_name(Script s)
{
    switch (s) {
    case Script::Silent: return "silent";
    case Script::EchoForger: return "echo_forger";
    case Script::ShareFlipper: return "share_flipper";
    case Script::StopForger: return "stop_forger";
    case Script::FormatCorruptor: return "format_corruptor";
    case Script::ClassSplitter: return "class_splitter";
    case Script::Replay: return "replay";
    case Script::Tamper: return "tamper";
    }
    return "?";
}

AdversarySpec scripted(Script s, NodeSet corrupted, uint64_t seed, int from_round)
{
    AdversarySpec a;
    a.mode = AdversarySpec::Active;
    a.corrupted = std::move(corrupted);
    a.seed = seed;
    a.strategy = [s, from_round] { return std::make_unique<Scripted>(s, from_round); };
    a.name = script_name(s) + (from_round > 1 ? "@" + std::to_string(from_round) : "");
    return a;
}

}  // namespace psmt
