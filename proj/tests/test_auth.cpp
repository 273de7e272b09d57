#include "doctest_main.hpp"

#include <map>

#include "psmt/auth.hpp"

using namespace psmt;

TEST_CASE("linear and quadratic tags")
{
    const FieldSpec& f = FieldSpec::prime(7);
    CHECK(auth_linear(f.elem(3), {f.elem(2), f.elem(4)}).value.value() == (2 * 3 + 4) % 7);
    CHECK(auth_linear(f.elem(5), {f.zero(), f.zero()}).value.is_zero());
    CHECK(auth_linear(f.elem(5), {f.one(), f.zero()}).value == f.elem(5));
    CHECK(auth_quad(f.elem(2), {f.one(), f.one(), f.one()}).value.value() == (4 + 2 + 1) % 7);
    CHECK(auth_quad(f.elem(2), {f.zero(), f.zero(), f.zero()}).value.is_zero());
    CHECK(auth_quad(f.zero(), {f.elem(3), f.elem(4), f.elem(6)}).value == f.elem(6));
}

TEST_CASE("verify")
{
    const FieldSpec& f = FieldSpec::prime(7);
    LinearKey k{f.elem(2), f.elem(4)};
    CHECK(verify(f.elem(3), {f.elem(3)}, k));
    CHECK_FALSE(verify(f.elem(3), {f.elem(4)}, k));
    QuadKey q{f.elem(1), f.elem(1), f.elem(1)};
    CHECK(verify(f.elem(2), {f.zero()}, q));
    CHECK_FALSE(verify(f.elem(2), {f.one()}, q));
}

TEST_CASE("one observed pair leaves the slope uniform over GF(5)")
{
    const FieldSpec& f = FieldSpec::prime(5);
    for (uint32_t m = 0; m < 5; ++m) {
        for (uint32_t t = 0; t < 5; ++t) {
            std::map<uint32_t, int> slopes;
            int count = 0;
            for (uint32_t a = 0; a < 5; ++a)
                for (uint32_t b = 0; b < 5; ++b)
                    if ((a * m + b) % 5 == t) {
                        ++count;
                        slopes[a]++;
                        CHECK(verify(f.elem(m), {f.elem(t)}, LinearKey{f.elem(a), f.elem(b)}));
                    }
            CHECK(count == 5);
            CHECK(slopes.size() == 5);
        }
    }
}

TEST_CASE("substitution succeeds with probability exactly 1/|F| over GF(5)")
{
    const FieldSpec& f = FieldSpec::prime(5);
    for (uint32_t m = 0; m < 5; ++m)
        for (uint32_t t = 0; t < 5; ++t)
            for (uint32_t m2 = 0; m2 < 5; ++m2) {
                if (m2 == m) continue;
                for (uint32_t t2 = 0; t2 < 5; ++t2) {
                    int consistent = 0, forged = 0;
                    for (uint32_t a = 0; a < 5; ++a)
                        for (uint32_t b = 0; b < 5; ++b) {
                            LinearKey key{f.elem(a), f.elem(b)};
                            if (!verify(f.elem(m), {f.elem(t)}, key)) continue;
                            ++consistent;
                            if (verify(f.elem(m2), {f.elem(t2)}, key)) ++forged;
                        }
                    CHECK(consistent == 5);
                    CHECK(forged == 1);
                }
            }
}

// The slope stays uniform for every pair; b is pinned when M1 + M2 = 0 and c
// when M1 * M2 = 0.
TEST_CASE("two observed pairs under a quadratic key over GF(5)")
{
    const FieldSpec& f = FieldSpec::prime(5);
    for (uint32_t m1 = 0; m1 < 5; ++m1)
        for (uint32_t m2 = m1 + 1; m2 < 5; ++m2)
            for (uint32_t t1 = 0; t1 < 5; ++t1)
                for (uint32_t t2 = 0; t2 < 5; ++t2) {
                    std::map<uint32_t, int> pa, pb, pc;
                    int count = 0;
                    for (uint32_t a = 0; a < 5; ++a)
                        for (uint32_t b = 0; b < 5; ++b)
                            for (uint32_t c = 0; c < 5; ++c) {
                                QuadKey key{f.elem(a), f.elem(b), f.elem(c)};
                                if (verify(f.elem(m1), {f.elem(t1)}, key) && verify(f.elem(m2), {f.elem(t2)}, key)) {
                                    ++count;
                                    pa[a]++;
                                    pb[b]++;
                                    pc[c]++;
                                }
                            }
                    CHECK(count == 5);
                    CHECK(pa.size() == 5);
                    CHECK(pb.size() == ((m1 + m2) % 5 ? 5u : 1u));
                    CHECK(pc.size() == (m1 * m2 % 5 ? 5u : 1u));
                }
}

TEST_CASE("tuples are authenticated per component")
{
    const FieldSpec& f = FieldSpec::prime(11);
    LinearKey key{f.elem(3), f.elem(7)};
    std::vector<FieldElement> items{f.elem(1), f.elem(2), f.elem(9)};
    auto tags = auth_tuple(items, key);
    REQUIRE(tags.size() == 3);
    for (size_t i = 0; i < 3; ++i) CHECK(tags[i].value == auth_linear(items[i], key).value);
    CHECK(verify_tuple(items, tags, key));
    tags.pop_back();
    CHECK_FALSE(verify_tuple(items, tags, key));
}

TEST_CASE("extension elements carry one polynomial tag")
{
    const FieldSpec& f = FieldSpec::prime(11);
    LinearKey key{f.elem(3), f.elem(7)};
    std::vector<FieldElement> items{f.elem(1), f.elem(2), f.elem(9)};
    ExtElement e = encode_tuple(items, 4);
    AuthTag tag = auth_ext(e, f, 4, key);
    // 7 + 1*3 + 2*9 + 9*27 + 81 over GF(11)
    CHECK(tag.value.value() == (7 + 3 + 18 + 243 + 81) % 11);
    CHECK(verify_ext(e, f, 4, tag, key));
    CHECK_FALSE(verify_ext(encode_tuple({f.elem(1), f.elem(3), f.elem(9)}, 4), f, 4, tag, key));
    CHECK_FALSE(verify_ext(encode_tuple({f.elem(1), f.elem(2), f.elem(9), f.zero()}, 4), f, 4, tag, key));
    ExtElement broken = e;
    broken.words[0].v = 7;
    CHECK_FALSE(verify_ext(broken, f, 4, tag, key));
}

TEST_CASE("polynomial tag: hiding and substitution bound over GF(5)")
{
    const FieldSpec& f = FieldSpec::prime(5);
    // All tuples of length <= 2.
    std::vector<std::vector<FieldElement>> all{{}};
    for (uint32_t a = 0; a < 5; ++a) {
        all.push_back({f.elem(a)});
        for (uint32_t b = 0; b < 5; ++b) all.push_back({f.elem(a), f.elem(b)});
    }
    for (const auto& x : all) {
        // Tag and slope are independent: each (slope, tag) pair appears once.
        std::map<std::pair<uint32_t, uint32_t>, int> joint;
        for (uint32_t a = 0; a < 5; ++a)
            for (uint32_t b = 0; b < 5; ++b) joint[{a, auth_items(x, {f.elem(a), f.elem(b)}).value.value()}]++;
        CHECK(joint.size() == 25);
        // Worst substitution given (x, tag): at most (L+1)/|F| of keys accept.
        for (const auto& y : all) {
            if (y.size() == x.size() && std::equal(x.begin(), x.end(), y.begin())) continue;
            for (uint32_t t = 0; t < 5; ++t)
                for (uint32_t t2 = 0; t2 < 5; ++t2) {
                    int consistent = 0, accept = 0;
                    for (uint32_t a = 0; a < 5; ++a)
                        for (uint32_t b = 0; b < 5; ++b) {
                            LinearKey k{f.elem(a), f.elem(b)};
                            if (auth_items(x, k).value.value() != t) continue;
                            ++consistent;
                            if (auth_items(y, k).value.value() == t2) ++accept;
                        }
                    const size_t len = std::max(x.size(), y.size()) + 1;
                    CHECK(accept * 5 <= int(len) * consistent);
                }
        }
    }
}

TEST_CASE("armed keys refuse reuse")
{
    const FieldSpec& f = FieldSpec::prime(7);
    ArmedKey<LinearKey> k(LinearKey{f.one(), f.one()});
    CHECK_FALSE(k.used());
    CHECK_NOTHROW(k.use());
    CHECK_THROWS_AS(k.use(), KeyReuse);
}
