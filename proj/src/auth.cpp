#include "psmt/auth.hpp"

namespace psmt {

AuthTag auth_linear(const FieldElement& m, const LinearKey& key) { return {key.a * m + key.b}; }

AuthTag auth_quad(const FieldElement& m, const QuadKey& key)
{
    return {(key.a * m + key.b) * m + key.c};
}

bool verify(const FieldElement& m, const AuthTag& tag, const LinearKey& key)
{
    return auth_linear(m, key).value == tag.value;
}

bool verify(const FieldElement& m, const AuthTag& tag, const QuadKey& key)
{
    return auth_quad(m, key).value == tag.value;
}

std::vector<AuthTag> auth_tuple(const std::vector<FieldElement>& items, const LinearKey& key)
{
    std::vector<AuthTag> tags;
    tags.reserve(items.size());
    for (auto& x : items) tags.push_back(auth_linear(x, key));
    return tags;
}

bool verify_tuple(const std::vector<FieldElement>& items, const std::vector<AuthTag>& tags,
                  const LinearKey& key)
{
    if (items.size() != tags.size()) return false;
    for (size_t i = 0; i < items.size(); ++i)
        if (!verify(items[i], tags[i], key)) return false;
    return true;
}

AuthTag auth_items(const std::vector<FieldElement>& items, const LinearKey& key)
{
    FieldElement acc = key.b, power = key.a;
    for (const auto& x : items) {
        acc += x * power;
        power *= key.a;
    }
    return {acc + power};
}

bool verify_items(const std::vector<FieldElement>& items, const AuthTag& tag, const LinearKey& key)
{
    return auth_items(items, key).value == tag.value;
}

AuthTag auth_ext(const ExtElement& e, const FieldSpec& f, size_t bound, const LinearKey& key)
{
    return auth_items(decode_tuple(e, f, bound), key);
}

bool verify_ext(const ExtElement& e, const FieldSpec& f, size_t bound, const AuthTag& tag, const LinearKey& key)
{
    try {
        return verify_items(decode_tuple(e, f, bound), tag, key);
    } catch (const DecodeError&) {
        return false;
    }
}

}  // namespace psmt
