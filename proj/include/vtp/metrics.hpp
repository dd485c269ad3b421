#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace vtp {

using TokenList = std::vector<std::string>;

/// Lowercases (ASCII), strips punctuation (ASCII plus common Unicode
/// punctuation blocks, treated as separators), splits on whitespace.
TokenList tokenize_simple(std::string_view text);

enum class BleuSmoothing { none, add_one };

struct BleuResult {
    double score = 0.0;
    std::vector<double> precisions;
    double brevity_penalty = 1.0;
    bool empty_hypothesis = false;
};

/// Geometric mean of clipped n-gram precisions times the brevity penalty
/// e^(1 - r/c) for c <= r, with closest-length reference matching (ties to
/// the shorter reference). add_one smoothing applies to n >= 2 only.
BleuResult bleu(const TokenList& hyp, const std::vector<TokenList>& refs,
                size_t max_n = 4, BleuSmoothing smoothing = BleuSmoothing::add_one);

/// LCS-based F1 (beta = 1); 0 when either side is empty.
double rouge_l(const TokenList& hyp, const TokenList& ref);

/// Classic Porter stemming.
std::string porter_stem(std::string_view word);

/// Unigram alignment on exact then stemmed matches; F_mean = 10PR/(R+9P),
/// fragmentation penalty 0.5*(chunks/matches)^3. No synonym resource.
double meteor_lite(const TokenList& hyp, const TokenList& ref);

struct CiderOptions {
    size_t max_n = 4;
    double sigma = 6.0; // length penalty width
    double scale = 10.0;
};

/// CIDEr-D over the given corpus; document frequencies come from the
/// evaluated reference corpus itself. Scores lie in [0, scale].
std::vector<double> cider(const std::vector<TokenList>& hyps,
                          const std::vector<std::vector<TokenList>>& refs,
                          const CiderOptions& options = {});

/// Kendall's coefficient of concordance over an m x n rank matrix (one row
/// per judge, mid-ranks for ties, tie-corrected denominator).
double kendall_w(const std::vector<std::vector<double>>& rankings);

} // namespace vtp
