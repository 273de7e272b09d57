#pragma once

#include <vector>

#include "psmt/field.hpp"

namespace psmt {

struct LinearKey {
    FieldElement a, b;
};

struct QuadKey {
    FieldElement a, b, c;
};

struct AuthTag {
    FieldElement value;
};

// a*M + b
AuthTag auth_linear(const FieldElement& m, const LinearKey& key);
// a*M^2 + b*M + c
AuthTag auth_quad(const FieldElement& m, const QuadKey& key);

bool verify(const FieldElement& m, const AuthTag& tag, const LinearKey& key);
bool verify(const FieldElement& m, const AuthTag& tag, const QuadKey& key);

// Item by item under one key. Only safe when the key slope stays secret
// regardless of the items, since two known items reveal it.
std::vector<AuthTag> auth_tuple(const std::vector<FieldElement>& items, const LinearKey& key);
bool verify_tuple(const std::vector<FieldElement>& items, const std::vector<AuthTag>& tags,
                  const LinearKey& key);
// One tag for a whole tuple x_1..x_L: b + sum x_j a^j + a^(L+1). Forgery
// succeeds with probability at most (L+1)/|F|, and b masks the tag.
AuthTag auth_items(const std::vector<FieldElement>& items, const LinearKey& key);
bool verify_items(const std::vector<FieldElement>& items, const AuthTag& tag, const LinearKey& key);
AuthTag auth_ext(const ExtElement& e, const FieldSpec& f, size_t bound, const LinearKey& key);
// False (not an exception) when e does not decode.
bool verify_ext(const ExtElement& e, const FieldSpec& f, size_t bound, const AuthTag& tag, const LinearKey& key);

// Single-use wrapper: a second use() throws KeyReuse.
template <class Key>
class ArmedKey {
public:
    explicit ArmedKey(Key k) : key_(std::move(k)) {}
    const Key& use()
    {
        if (used_) throw KeyReuse("one-time key used twice");
        used_ = true;
        return key_;
    }
    bool used() const { return used_; }

private:
    Key key_;
    bool used_ = false;
};

}  // namespace psmt
