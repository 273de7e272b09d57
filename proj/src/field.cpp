#include "psmt/field.hpp"

#include <algorithm>
#include <map>
#include <mutex>
#include <regex>

namespace psmt {

Taint Taint::coin(uint32_t id)
{
    Taint t;
    t.ids_ = std::make_shared<const std::vector<uint32_t>>(1, id);
    return t;
}

const std::vector<uint32_t>& Taint::ids() const
{
    static const std::vector<uint32_t> none;
    return ids_ ? *ids_ : none;
}

Taint Taint::operator|(const Taint& o) const
{
    if (o.empty() || ids_ == o.ids_) return *this;
    if (empty()) return o;
    auto out = std::make_shared<std::vector<uint32_t>>();
    out->reserve(ids_->size() + o.ids_->size());
    std::set_union(ids_->begin(), ids_->end(), o.ids_->begin(), o.ids_->end(),
                   std::back_inserter(*out));
    Taint t;
    if (out->size() == ids_->size()) return *this;
    if (out->size() == o.ids_->size()) return o;
    t.ids_ = std::move(out);
    return t;
}

namespace {

bool is_prime(uint64_t n)
{
    if (n < 2) return false;
    for (uint64_t d = 2; d * d <= n; ++d)
        if (n % d == 0) return false;
    return true;
}

std::vector<uint64_t> prime_factors(uint64_t n)
{
    std::vector<uint64_t> out;
    for (uint64_t d = 2; d * d <= n; ++d) {
        if (n % d) continue;
        out.push_back(d);
        while (n % d == 0) n /= d;
    }
    if (n > 1) out.push_back(n);
    return out;
}

// Dense polynomials over GF(p), lowest degree first, used only to validate
// and search reduction polynomials.
using Poly = std::vector<uint32_t>;

Poly unpack(uint64_t packed, uint32_t p)
{
    Poly out;
    while (packed) {
        out.push_back(uint32_t(packed % p));
        packed /= p;
    }
    return out;
}

void trim(Poly& a)
{
    while (!a.empty() && a.back() == 0) a.pop_back();
}

uint32_t inv_mod(uint32_t a, uint32_t p)
{
    uint64_t r = 1, b = a, e = p - 2;
    while (e) {
        if (e & 1) r = r * b % p;
        b = b * b % p;
        e >>= 1;
    }
    return uint32_t(r);
}

Poly poly_mod(Poly a, const Poly& m, uint32_t p)
{
    trim(a);
    uint32_t lead_inv = inv_mod(m.back(), p);
    while (a.size() >= m.size()) {
        uint64_t c = uint64_t(a.back()) * lead_inv % p;
        size_t shift = a.size() - m.size();
        for (size_t i = 0; i < m.size(); ++i)
            a[shift + i] = uint32_t((a[shift + i] + (p - c) * m[i]) % p);
        trim(a);
    }
    return a;
}

bool irreducible(const Poly& f, uint32_t p)
{
    size_t deg = f.size() - 1;
    if (deg < 1 || f.back() == 0) return false;
    if (deg == 1) return true;
    // Trial division by every monic polynomial of degree 1..deg/2.
    for (size_t d = 1; d <= deg / 2; ++d) {
        uint64_t count = 1;
        for (size_t i = 0; i < d; ++i) count *= p;
        for (uint64_t low = 0; low < count; ++low) {
            Poly g(d + 1);
            uint64_t x = low;
            for (size_t i = 0; i < d; ++i) {
                g[i] = uint32_t(x % p);
                x /= p;
            }
            g[d] = 1;
            if (poly_mod(f, g, p).empty()) return false;
        }
    }
    return true;
}

uint64_t ipow(uint64_t b, unsigned e)
{
    uint64_t r = 1;
    while (e--) r *= b;
    return r;
}

uint64_t smallest_irreducible(uint32_t p, unsigned m)
{
    uint64_t base = ipow(p, m);
    for (uint64_t low = 0; low < base; ++low) {
        uint64_t packed = base + low;
        if (irreducible(unpack(packed, p), p)) return packed;
    }
    throw ParamError("no irreducible polynomial found");
}

}  // namespace

struct FieldRegistry {
    std::mutex mu;
    std::map<std::pair<uint64_t, uint64_t>, std::unique_ptr<FieldSpec>> fields;

    static FieldRegistry& get()
    {
        static FieldRegistry r;
        return r;
    }

    const FieldSpec& intern(uint32_t p, unsigned m, uint64_t poly)
    {
        std::lock_guard<std::mutex> lock(mu);
        auto key = std::make_pair(ipow(p, m), poly);
        auto it = fields.find(key);
        if (it != fields.end()) return *it->second;
        auto f = std::unique_ptr<FieldSpec>(new FieldSpec(p, m, poly));
        return *fields.emplace(key, std::move(f)).first->second;
    }
};

FieldSpec::FieldSpec(uint32_t p, unsigned m, uint64_t poly)
    : p_(p), m_(m), order_(ipow(p, m)), poly_(poly)
{
    rep_ = m == 1 ? Representation::PrimeModular
           : p == 2 ? Representation::BinaryPolynomial
                    : Representation::ExtensionPolynomial;
    if (m > 1 && order_ <= (1u << 20)) build_tables();
}

const FieldSpec& FieldSpec::prime(uint32_t p)
{
    if (!is_prime(p)) throw ParamError("field order " + std::to_string(p) + " is not prime");
    return FieldRegistry::get().intern(p, 1, 0);
}

const FieldSpec& FieldSpec::binary(unsigned m, uint64_t poly)
{
    return extension(2, m, poly);
}

const FieldSpec& FieldSpec::extension(uint32_t p, unsigned m, uint64_t poly)
{
    if (m == 1 && poly == 0) return prime(p);
    if (!is_prime(p)) throw ParamError("characteristic must be prime");
    if (m < 1 || ipow(p, m) > (uint64_t(1) << 32) || (p == 2 && m > 32))
        throw ParamError("field order out of range");
    if (poly == 0) {
        poly = smallest_irreducible(p, m);
    } else {
        Poly f = unpack(poly, p);
        if (f.size() != m + 1 || f.back() != 1)
            throw ParamError("reduction polynomial must be monic of degree " + std::to_string(m));
        if (!irreducible(f, p)) throw ParamError("reduction polynomial is not irreducible");
    }
    return FieldRegistry::get().intern(p, m, poly);
}

const FieldSpec& FieldSpec::of_order(uint64_t order, uint64_t poly)
{
    if (order < 2 || order > (uint64_t(1) << 32)) throw ParamError("field order out of range");
    for (uint64_t p = 2; p * p <= order; ++p) {
        if (order % p) continue;
        unsigned m = 0;
        uint64_t x = order;
        while (x % p == 0) {
            x /= p;
            ++m;
        }
        if (x != 1) throw ParamError("field order is not a prime power");
        return extension(uint32_t(p), m, poly);
    }
    if (poly != 0) throw ParamError("prime fields take no reduction polynomial");
    return prime(uint32_t(order));
}

const FieldSpec& FieldSpec::parse(const std::string& text)
{
    static const std::regex re(R"(^\s*(?:GF\()?\s*(\d+)\s*(?:\^\s*(\d+))?\s*\)?\s*$)",
                               std::regex::icase);
    std::smatch m;
    if (!std::regex_match(text, m, re)) throw ParamError("cannot parse field '" + text + "'");
    uint64_t base = std::stoull(m[1].str());
    unsigned e = m[2].matched ? unsigned(std::stoul(m[2].str())) : 1;
    if (e > 32 || base < 2) throw ParamError("cannot parse field '" + text + "'");
    long double approx = 1;
    for (unsigned i = 0; i < e; ++i) approx *= base;
    if (approx > (long double)(uint64_t(1) << 32)) throw ParamError("field order out of range");
    return of_order(ipow(base, e));
}

std::string FieldSpec::name() const
{
    if (m_ == 1) return "GF(" + std::to_string(p_) + ")";
    return "GF(" + std::to_string(p_) + "^" + std::to_string(m_) + ")";
}

void FieldSpec::build_tables()
{
    exp_.assign(2 * order_, 0);
    log_.assign(order_, 0);
    uint64_t n = order_ - 1;
    auto factors = prime_factors(n);
    for (uint32_t g = 2; g < order_; ++g) {
        auto slow_pow = [&](uint32_t a, uint64_t e) {
            uint32_t r = 1;
            while (e) {
                if (e & 1) r = poly_mul(r, a);
                a = poly_mul(a, a);
                e >>= 1;
            }
            return r;
        };
        bool primitive = true;
        for (uint64_t q : factors)
            if (slow_pow(g, n / q) == 1) primitive = false;
        if (!primitive) continue;
        uint32_t x = 1;
        for (uint64_t i = 0; i < n; ++i) {
            exp_[i] = exp_[i + n] = x;
            log_[x] = uint32_t(i);
            x = poly_mul(x, g);
        }
        return;
    }
    throw ParamError("no primitive element");
}

uint32_t FieldSpec::add(uint32_t a, uint32_t b) const
{
    switch (rep_) {
    case Representation::PrimeModular: {
        uint64_t s = uint64_t(a) + b;
        return uint32_t(s >= p_ ? s - p_ : s);
    }
    case Representation::BinaryPolynomial:
        return a ^ b;
    default: {
        uint32_t out = 0, scale = 1;
        for (unsigned i = 0; i < m_; ++i) {
            out += ((a % p_ + b % p_) % p_) * scale;
            a /= p_;
            b /= p_;
            scale *= p_;
        }
        return out;
    }
    }
}

uint32_t FieldSpec::neg(uint32_t a) const
{
    switch (rep_) {
    case Representation::PrimeModular:
        return a == 0 ? 0 : p_ - a;
    case Representation::BinaryPolynomial:
        return a;
    default: {
        uint32_t out = 0, scale = 1;
        for (unsigned i = 0; i < m_; ++i) {
            out += ((p_ - a % p_) % p_) * scale;
            a /= p_;
            scale *= p_;
        }
        return out;
    }
    }
}

uint32_t FieldSpec::sub(uint32_t a, uint32_t b) const { return add(a, neg(b)); }

// Schoolbook product modulo the reduction polynomial.
uint32_t FieldSpec::poly_mul(uint32_t a, uint32_t b) const
{
    if (rep_ == Representation::BinaryPolynomial) {
        uint64_t r = 0, x = a;
        for (unsigned i = 0; i < m_; ++i)
            if (b >> i & 1) r ^= x << i;
        for (int i = 2 * int(m_) - 2; i >= int(m_); --i)
            if (r >> i & 1) r ^= poly_ << (i - m_);
        return uint32_t(r);
    }
    Poly pa(m_), pb(m_), f = unpack(poly_, p_);
    for (unsigned i = 0; i < m_; ++i) {
        pa[i] = a % p_;
        a /= p_;
        pb[i] = b % p_;
        b /= p_;
    }
    Poly r(2 * m_, 0);
    for (unsigned i = 0; i < m_; ++i)
        for (unsigned j = 0; j < m_; ++j)
            r[i + j] = uint32_t((r[i + j] + uint64_t(pa[i]) * pb[j]) % p_);
    r = poly_mod(r, f, p_);
    uint32_t out = 0, scale = 1;
    for (unsigned i = 0; i < m_; ++i) {
        if (i < r.size()) out += r[i] * scale;
        scale *= p_;
    }
    return out;
}

uint32_t FieldSpec::mul(uint32_t a, uint32_t b) const
{
    if (rep_ == Representation::PrimeModular) return uint32_t(uint64_t(a) * b % p_);
    if (a == 0 || b == 0) return 0;
    if (!exp_.empty()) return exp_[log_[a] + log_[b]];
    return poly_mul(a, b);
}

uint32_t FieldSpec::pow(uint32_t a, uint64_t e) const
{
    uint32_t r = 1;
    while (e) {
        if (e & 1) r = mul(r, a);
        a = mul(a, a);
        e >>= 1;
    }
    return r;
}

uint32_t FieldSpec::inv(uint32_t a) const
{
    if (a == 0) throw DivisionByZero("inverse of zero in " + name());
    if (!exp_.empty()) return exp_[(order_ - 1 - log_[a]) % (order_ - 1)];
    return pow(a, order_ - 2);
}

FieldElement FieldSpec::elem(uint64_t v) const { return FieldElement(*this, v); }
FieldElement FieldSpec::zero() const { return FieldElement(*this, 0); }
FieldElement FieldSpec::one() const { return FieldElement(*this, 1); }
FieldElement FieldSpec::sample(Rng& rng) const { return FieldElement(*this, rng.below(order_)); }

FieldElement sample_uniform(const FieldSpec& f, Rng& rng) { return f.sample(rng); }

FieldElement::FieldElement(const FieldSpec& f, uint64_t v, Taint t)
    : f_(&f), v_(uint32_t(v)), t_(std::move(t))
{
    if (v >= f.order()) throw ParamError("value " + std::to_string(v) + " outside " + f.name());
}

const FieldSpec& FieldElement::spec() const
{
    if (!f_) throw SpecMismatch("element has no field");
    return *f_;
}

const FieldSpec& FieldElement::check(const FieldElement& o) const
{
    if (!f_ || f_ != o.f_) throw SpecMismatch("operands from different fields");
    return *f_;
}

FieldElement FieldElement::operator+(const FieldElement& o) const
{
    const FieldSpec& f = check(o);
    return FieldElement(f, f.add(v_, o.v_), t_ | o.t_);
}

FieldElement FieldElement::operator-(const FieldElement& o) const
{
    const FieldSpec& f = check(o);
    return FieldElement(f, f.sub(v_, o.v_), t_ | o.t_);
}

FieldElement FieldElement::operator*(const FieldElement& o) const
{
    const FieldSpec& f = check(o);
    return FieldElement(f, f.mul(v_, o.v_), t_ | o.t_);
}

FieldElement FieldElement::operator/(const FieldElement& o) const
{
    const FieldSpec& f = check(o);
    return FieldElement(f, f.mul(v_, f.inv(o.v_)), t_ | o.t_);
}

FieldElement FieldElement::operator-() const { return FieldElement(spec(), f_->neg(v_), t_); }
FieldElement FieldElement::inv() const { return FieldElement(spec(), f_->inv(v_), t_); }
FieldElement FieldElement::pow(uint64_t e) const { return FieldElement(spec(), f_->pow(v_, e), t_); }

bool FieldElement::operator==(const FieldElement& o) const
{
    check(o);
    return v_ == o.v_;
}

bool ExtElement::operator==(const ExtElement& o) const
{
    if (words.size() != o.words.size()) return false;
    for (size_t i = 0; i < words.size(); ++i)
        if (words[i].v != o.words[i].v) return false;
    return true;
}

ExtElement encode_tuple(const std::vector<FieldElement>& items, size_t bound)
{
    if (items.size() > bound)
        throw TupleTooLong("tuple of length " + std::to_string(items.size()) + " exceeds bound " +
                           std::to_string(bound));
    ExtElement e;
    e.words.reserve(items.size() + 1);
    e.words.push_back({uint32_t(items.size()), {}});
    for (size_t i = 0; i < items.size(); ++i) {
        if (i && &items[i].spec() != &items[0].spec()) throw SpecMismatch("mixed fields in tuple");
        e.words.push_back(to_word(items[i]));
    }
    return e;
}

std::vector<FieldElement> decode_tuple(const ExtElement& e, const FieldSpec& f, size_t bound)
{
    if (e.words.empty()) throw DecodeError("missing length prefix");
    size_t len = e.words[0].v;
    if (len > bound) throw DecodeError("length prefix above bound");
    if (e.words.size() != len + 1) throw DecodeError("length prefix does not match payload");
    std::vector<FieldElement> out;
    out.reserve(len);
    for (size_t i = 1; i <= len; ++i) {
        if (!f.contains(e.words[i].v)) throw DecodeError("value outside field");
        out.emplace_back(f, e.words[i].v, e.words[i].t);
    }
    return out;
}

}  // namespace psmt
