#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "psmt/errors.hpp"
#include "psmt/rng.hpp"

namespace psmt {

// Set of honest coin indices a value was computed from. Empty unless a
// Coins source is running in tracking mode (used by exact view enumeration).
class Taint {
public:
    Taint() = default;
    static Taint coin(uint32_t id);

    bool empty() const { return !ids_ || ids_->empty(); }
    const std::vector<uint32_t>& ids() const;
    Taint operator|(const Taint& o) const;
    Taint& operator|=(const Taint& o) { return *this = *this | o; }

private:
    std::shared_ptr<const std::vector<uint32_t>> ids_;
};

enum class Representation { PrimeModular, BinaryPolynomial, ExtensionPolynomial };

class FieldElement;

// GF(p^m). Instances are interned and live for the whole process, so
// elements can hold a plain pointer to their spec.
class FieldSpec {
public:
    static const FieldSpec& prime(uint32_t p);
    // poly: reduction polynomial as a bit string including the x^m term;
    // 0 selects the smallest irreducible polynomial of degree m.
    static const FieldSpec& binary(unsigned m, uint64_t poly = 0);
    // poly: monic reduction polynomial packed base p (coefficient of x^i is
    // digit i); 0 selects the smallest irreducible one.
    static const FieldSpec& extension(uint32_t p, unsigned m, uint64_t poly = 0);
    static const FieldSpec& of_order(uint64_t order, uint64_t poly = 0);
    // Accepts "7", "GF(7)", "GF(2^16)", "GF(49)", "GF(7^2)", "65536".
    static const FieldSpec& parse(const std::string& text);

    uint64_t order() const { return order_; }
    uint32_t characteristic() const { return p_; }
    unsigned degree() const { return m_; }
    uint64_t poly() const { return poly_; }
    Representation representation() const { return rep_; }
    std::string name() const;

    uint32_t add(uint32_t a, uint32_t b) const;
    uint32_t sub(uint32_t a, uint32_t b) const;
    uint32_t neg(uint32_t a) const;
    uint32_t mul(uint32_t a, uint32_t b) const;
    uint32_t inv(uint32_t a) const;
    uint32_t pow(uint32_t a, uint64_t e) const;

    FieldElement elem(uint64_t v) const;
    FieldElement zero() const;
    FieldElement one() const;
    FieldElement sample(Rng& rng) const;
    bool contains(uint64_t v) const { return v < order_; }

    FieldSpec(const FieldSpec&) = delete;
    FieldSpec& operator=(const FieldSpec&) = delete;

private:
    FieldSpec(uint32_t p, unsigned m, uint64_t poly);
    friend struct FieldRegistry;

    uint32_t poly_mul(uint32_t a, uint32_t b) const;
    void build_tables();

    uint32_t p_;
    unsigned m_;
    uint64_t order_;
    uint64_t poly_;
    Representation rep_;
    std::vector<uint32_t> exp_, log_;  // present for small non-prime fields
};

class FieldElement {
public:
    FieldElement() = default;
    FieldElement(const FieldSpec& f, uint64_t v, Taint t = {});

    uint32_t value() const { return v_; }
    const FieldSpec& spec() const;
    bool has_spec() const { return f_ != nullptr; }
    const Taint& taint() const { return t_; }
    void set_taint(Taint t) { t_ = std::move(t); }
    bool is_zero() const { return v_ == 0; }

    FieldElement operator+(const FieldElement& o) const;
    FieldElement operator-(const FieldElement& o) const;
    FieldElement operator*(const FieldElement& o) const;
    FieldElement operator/(const FieldElement& o) const;
    FieldElement operator-() const;
    FieldElement& operator+=(const FieldElement& o) { return *this = *this + o; }
    FieldElement& operator-=(const FieldElement& o) { return *this = *this - o; }
    FieldElement& operator*=(const FieldElement& o) { return *this = *this * o; }
    FieldElement inv() const;
    FieldElement pow(uint64_t e) const;

    // Value equality; taint is ignored.
    bool operator==(const FieldElement& o) const;
    bool operator!=(const FieldElement& o) const { return !(*this == o); }

private:
    const FieldSpec& check(const FieldElement& o) const;

    const FieldSpec* f_ = nullptr;
    uint32_t v_ = 0;
    Taint t_;
};

// Raw wire word: a value plus the coins it was derived from.
struct Word {
    uint32_t v = 0;
    Taint t;
};

inline Word to_word(const FieldElement& x) { return {x.value(), x.taint()}; }

// Image of the tuple map: words[0] is the length prefix, followed by the
// values of the items.
struct ExtElement {
    std::vector<Word> words;

    size_t length() const { return words.empty() ? 0 : words[0].v; }
    bool operator==(const ExtElement& o) const;
};

ExtElement encode_tuple(const std::vector<FieldElement>& items, size_t bound);
// Throws DecodeError on a missing or inconsistent prefix, a length above the
// bound, or a value outside the field.
std::vector<FieldElement> decode_tuple(const ExtElement& e, const FieldSpec& f, size_t bound);

FieldElement sample_uniform(const FieldSpec& f, Rng& rng);

}  // namespace psmt
