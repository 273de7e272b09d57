#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "psmt/field.hpp"

namespace psmt {

// (k+1)-out-of-n Reed-Solomon sharing: share i is f(x_i) for a random
// polynomial f of degree <= k with f(0) = secret.
struct SharingParams {
    size_t n = 0;
    size_t k = 0;
    const FieldSpec* field = nullptr;
    std::vector<FieldElement> points;

    // Evaluation points 1..n.
    static SharingParams make(const FieldSpec& f, size_t n, size_t k);
    static SharingParams with_points(const FieldSpec& f, std::vector<FieldElement> points, size_t k);
    void validate() const;
    size_t max_correctable() const { return (n - k - 1) / 2; }
    size_t max_detectable() const { return n - k - 1; }
};

struct Codeword {
    std::vector<FieldElement> shares;
};

struct ReceivedWord {
    std::vector<std::optional<FieldElement>> entries;

    ReceivedWord() = default;
    explicit ReceivedWord(size_t n) : entries(n) {}
    static ReceivedWord from(const Codeword& c);
    static ReceivedWord from(const std::vector<FieldElement>& values);
    size_t present() const;
};

using CoinDraw = std::function<FieldElement()>;

Codeword share(const FieldElement& secret, const SharingParams& params, Rng& rng);
Codeword share(const FieldElement& secret, const SharingParams& params, const CoinDraw& draw);
// coefficients[i] is the coefficient of x^(i+1); exactly k of them.
Codeword share_with(const FieldElement& secret, const std::vector<FieldElement>& coefficients,
                    const SharingParams& params);

// Interpolates through the first k+1 present entries.
FieldElement reconstruct(const ReceivedWord& word, const SharingParams& params);

enum class Detection { Clean, Corrupted };
Detection detect_errors(const ReceivedWord& word, const SharingParams& params, size_t max_detect);

struct Correction {
    enum Status { Corrected, DetectedBeyond } status = DetectedBeyond;
    FieldElement secret;
    std::vector<size_t> error_positions;
    Codeword codeword;

    bool ok() const { return status == Corrected; }
};

// Corrects up to e errors. Never returns a wrong secret when the number of
// errors is at most n-k-e-1.
Correction correct_errors(const ReceivedWord& word, const SharingParams& params, size_t e);

// Exhaustive nearest-codeword search over all polynomials of degree <= k.
struct OracleResult {
    size_t distance = 0;
    std::vector<Codeword> nearest;  // size > 1 means a tie
    std::vector<FieldElement> secrets;

    bool tie() const { return nearest.size() > 1; }
};

constexpr uint64_t kOracleLimit = 10'000'000;
OracleResult oracle_decode(const ReceivedWord& word, const SharingParams& params);

// Polynomial helpers, coefficients lowest degree first.
FieldElement poly_eval(const std::vector<FieldElement>& coeffs, const FieldElement& x);
std::vector<FieldElement> interpolate(const std::vector<FieldElement>& xs,
                                      const std::vector<FieldElement>& ys);

}  // namespace psmt
