#include "vtp/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <unordered_map>
#include <unordered_set>

#include "vtp/error.hpp"

namespace vtp {

namespace {

bool is_unicode_punct(uint32_t cp) {
    return (cp >= 0x2000 && cp <= 0x206F) || // general punctuation
           (cp >= 0x2E00 && cp <= 0x2E7F) || // supplemental punctuation
           (cp >= 0x3000 && cp <= 0x303F) || // CJK symbols and punctuation
           cp == 0x00A1 || cp == 0x00BF || cp == 0x00AB || cp == 0x00BB ||
           cp == 0x00B7;
}

// Decodes one UTF-8 codepoint; advances i. Invalid bytes pass through as-is.
uint32_t decode_utf8(std::string_view s, size_t& i, size_t& len) {
    unsigned char c = (unsigned char)s[i];
    if (c < 0x80) { len = 1; return c; }
    size_t need = (c >= 0xF0) ? 4 : (c >= 0xE0) ? 3 : 2;
    if (i + need > s.size()) { len = 1; return c; }
    uint32_t cp = c & (0xFF >> (need + 1));
    for (size_t k = 1; k < need; ++k) {
        unsigned char cc = (unsigned char)s[i + k];
        if ((cc & 0xC0) != 0x80) { len = 1; return c; }
        cp = (cp << 6) | (cc & 0x3F);
    }
    len = need;
    return cp;
}

} // namespace

TokenList tokenize_simple(std::string_view text) {
    std::string norm;
    norm.reserve(text.size());
    size_t i = 0;
    while (i < text.size()) {
        size_t len = 1;
        uint32_t cp = decode_utf8(text, i, len);
        if (cp < 0x80) {
            char c = char(cp);
            if (std::isalnum((unsigned char)c))
                norm.push_back(char(std::tolower((unsigned char)c)));
            else
                norm.push_back(' ');
        } else if (is_unicode_punct(cp)) {
            norm.push_back(' ');
        } else {
            norm.append(text.substr(i, len));
        }
        i += len;
    }
    TokenList tokens;
    size_t pos = 0;
    while (pos < norm.size()) {
        while (pos < norm.size() && norm[pos] == ' ') ++pos;
        size_t start = pos;
        while (pos < norm.size() && norm[pos] != ' ') ++pos;
        if (pos > start) tokens.push_back(norm.substr(start, pos - start));
    }
    return tokens;
}

namespace {

using NGramCounts = std::unordered_map<std::string, double>;

NGramCounts ngram_counts(const TokenList& tokens, size_t n) {
    NGramCounts counts;
    if (tokens.size() < n) return counts;
    for (size_t i = 0; i + n <= tokens.size(); ++i) {
        std::string key;
        for (size_t k = 0; k < n; ++k) {
            if (k) key.push_back('\x1f');
            key += tokens[i + k];
        }
        counts[key] += 1.0;
    }
    return counts;
}

} // namespace

BleuResult bleu(const TokenList& hyp, const std::vector<TokenList>& refs,
                size_t max_n, BleuSmoothing smoothing) {
    if (max_n == 0) throw InvalidInput("bleu: max_n must be at least 1");
    if (refs.empty()) throw InvalidInput("bleu: at least one reference required");

    BleuResult result;
    result.precisions.assign(max_n, 0.0);
    if (hyp.empty()) {
        result.empty_hypothesis = true;
        return result;
    }

    double log_sum = 0.0;
    bool zero_precision = false;
    for (size_t n = 1; n <= max_n; ++n) {
        NGramCounts hyp_counts = ngram_counts(hyp, n);
        NGramCounts clip;
        for (const TokenList& ref : refs) {
            NGramCounts rc = ngram_counts(ref, n);
            for (const auto& [gram, count] : rc) {
                auto it = clip.find(gram);
                if (it == clip.end() || it->second < count) clip[gram] = count;
            }
        }
        double matched = 0.0, total = 0.0;
        for (const auto& [gram, count] : hyp_counts) {
            total += count;
            auto it = clip.find(gram);
            if (it != clip.end()) matched += std::min(count, it->second);
        }
        double p;
        if (smoothing == BleuSmoothing::add_one && n >= 2)
            p = (matched + 1.0) / (total + 1.0);
        else
            p = total > 0.0 ? matched / total : 0.0;
        result.precisions[n - 1] = p;
        if (p <= 0.0)
            zero_precision = true;
        else
            log_sum += std::log(p);
    }

    size_t c = hyp.size();
    size_t r = refs.front().size();
    for (const TokenList& ref : refs) {
        size_t len = ref.size();
        size_t best_diff = (r > c) ? r - c : c - r;
        size_t diff = (len > c) ? len - c : c - len;
        if (diff < best_diff || (diff == best_diff && len < r)) r = len;
    }
    result.brevity_penalty = c > r ? 1.0 : std::exp(1.0 - double(r) / double(c));
    result.score = zero_precision
                       ? 0.0
                       : result.brevity_penalty * std::exp(log_sum / double(max_n));
    return result;
}

double rouge_l(const TokenList& hyp, const TokenList& ref) {
    if (hyp.empty() || ref.empty()) return 0.0;
    size_t m = hyp.size(), n = ref.size();
    std::vector<size_t> prev(n + 1, 0), cur(n + 1, 0);
    for (size_t i = 1; i <= m; ++i) {
        for (size_t j = 1; j <= n; ++j) {
            if (hyp[i - 1] == ref[j - 1])
                cur[j] = prev[j - 1] + 1;
            else
                cur[j] = std::max(prev[j], cur[j - 1]);
        }
        std::swap(prev, cur);
    }
    double lcs = double(prev[n]);
    if (lcs == 0.0) return 0.0;
    double p = lcs / double(m), r = lcs / double(n);
    return 2.0 * p * r / (p + r);
}

// ---------------------------------------------------------------------------
// Porter stemmer (Porter 1980). Operates on lowercase ASCII words; anything
// else is returned unchanged.
namespace {

struct Porter {
    std::string w;

    bool is_cons(size_t i) const {
        char c = w[i];
        if (c == 'a' || c == 'e' || c == 'i' || c == 'o' || c == 'u') return false;
        if (c == 'y') return i == 0 ? true : !is_cons(i - 1);
        return true;
    }

    // Measure of w[0..end): number of VC sequences.
    size_t measure(size_t end) const {
        size_t m = 0, i = 0;
        while (i < end && is_cons(i)) ++i;
        while (i < end) {
            while (i < end && !is_cons(i)) ++i;
            if (i >= end) break;
            ++m;
            while (i < end && is_cons(i)) ++i;
        }
        return m;
    }

    bool has_vowel(size_t end) const {
        for (size_t i = 0; i < end; ++i)
            if (!is_cons(i)) return true;
        return false;
    }

    bool double_cons(size_t end) const {
        return end >= 2 && w[end - 1] == w[end - 2] && is_cons(end - 1);
    }

    // *o: consonant-vowel-consonant ending where the final consonant is not
    // w, x or y.
    bool cvc(size_t end) const {
        if (end < 3) return false;
        if (!is_cons(end - 1) || is_cons(end - 2) || !is_cons(end - 3)) return false;
        char c = w[end - 1];
        return c != 'w' && c != 'x' && c != 'y';
    }

    bool ends(std::string_view suffix) const {
        return w.size() >= suffix.size() &&
               w.compare(w.size() - suffix.size(), suffix.size(), suffix) == 0;
    }

    size_t stem_len(std::string_view suffix) const { return w.size() - suffix.size(); }

    void replace(std::string_view suffix, std::string_view with) {
        w.resize(w.size() - suffix.size());
        w.append(with);
    }

    void step1ab() {
        if (ends("sses")) replace("sses", "ss");
        else if (ends("ies")) replace("ies", "i");
        else if (!ends("ss") && ends("s")) replace("s", "");

        if (ends("eed")) {
            if (measure(stem_len("eed")) > 0) replace("eed", "ee");
        } else {
            bool removed = false;
            if (ends("ed") && has_vowel(stem_len("ed"))) {
                replace("ed", "");
                removed = true;
            } else if (ends("ing") && has_vowel(stem_len("ing"))) {
                replace("ing", "");
                removed = true;
            }
            if (removed) {
                if (ends("at")) replace("at", "ate");
                else if (ends("bl")) replace("bl", "ble");
                else if (ends("iz")) replace("iz", "ize");
                else if (double_cons(w.size())) {
                    char c = w.back();
                    if (c != 'l' && c != 's' && c != 'z') w.pop_back();
                } else if (measure(w.size()) == 1 && cvc(w.size())) {
                    w.push_back('e');
                }
            }
        }
    }

    void step1c() {
        if (ends("y") && has_vowel(stem_len("y"))) w.back() = 'i';
    }

    struct Rule {
        std::string_view from, to;
    };

    // Longest matching suffix first; its condition decides, no fallback.
    void apply_rules(std::initializer_list<Rule> rules, size_t min_measure) {
        const Rule* best = nullptr;
        for (const Rule& r : rules)
            if (ends(r.from) && (!best || r.from.size() > best->from.size())) best = &r;
        if (best && measure(stem_len(best->from)) > min_measure)
            replace(best->from, best->to);
    }

    void step2() {
        apply_rules({{"ational", "ate"}, {"tional", "tion"}, {"enci", "ence"},
                     {"anci", "ance"},   {"izer", "ize"},    {"abli", "able"},
                     {"alli", "al"},     {"entli", "ent"},   {"eli", "e"},
                     {"ousli", "ous"},   {"ization", "ize"}, {"ation", "ate"},
                     {"ator", "ate"},    {"alism", "al"},    {"iveness", "ive"},
                     {"fulness", "ful"}, {"ousness", "ous"}, {"aliti", "al"},
                     {"iviti", "ive"},   {"biliti", "ble"}},
                    0);
    }

    void step3() {
        apply_rules({{"icate", "ic"}, {"ative", ""}, {"alize", "al"},
                     {"iciti", "ic"}, {"ical", "ic"}, {"ful", ""},
                     {"ness", ""}},
                    0);
    }

    void step4() {
        const Rule rules[] = {{"al", ""},    {"ance", ""}, {"ence", ""}, {"er", ""},
                              {"ic", ""},    {"able", ""}, {"ible", ""}, {"ant", ""},
                              {"ement", ""}, {"ment", ""}, {"ent", ""},  {"ion", ""},
                              {"ou", ""},    {"ism", ""},  {"ate", ""},  {"iti", ""},
                              {"ous", ""},   {"ive", ""},  {"ize", ""}};
        const Rule* best = nullptr;
        for (const Rule& r : rules)
            if (ends(r.from) && (!best || r.from.size() > best->from.size())) best = &r;
        if (!best) return;
        size_t stem = stem_len(best->from);
        if (measure(stem) <= 1) return;
        if (best->from == "ion" && !(stem >= 1 && (w[stem - 1] == 's' || w[stem - 1] == 't')))
            return;
        replace(best->from, best->to);
    }

    void step5() {
        if (ends("e")) {
            size_t m = measure(stem_len("e"));
            if (m > 1 || (m == 1 && !cvc(stem_len("e")))) replace("e", "");
        }
        if (measure(w.size()) > 1 && double_cons(w.size()) && w.back() == 'l')
            w.pop_back();
    }
};

} // namespace

std::string porter_stem(std::string_view word) {
    if (word.size() <= 2) return std::string(word);
    for (char c : word)
        if (c < 'a' || c > 'z') return std::string(word);
    Porter p{std::string(word)};
    p.step1ab();
    p.step1c();
    p.step2();
    p.step3();
    p.step4();
    p.step5();
    return p.w;
}

double meteor_lite(const TokenList& hyp, const TokenList& ref) {
    if (hyp.empty() || ref.empty()) return 0.0;

    std::vector<int> hyp_to_ref(hyp.size(), -1);
    std::vector<bool> ref_used(ref.size(), false);
    auto align = [&](auto key) {
        for (size_t h = 0; h < hyp.size(); ++h) {
            if (hyp_to_ref[h] >= 0) continue;
            for (size_t r = 0; r < ref.size(); ++r) {
                if (ref_used[r]) continue;
                if (key(hyp[h]) == key(ref[r])) {
                    hyp_to_ref[h] = int(r);
                    ref_used[r] = true;
                    break;
                }
            }
        }
    };
    align([](const std::string& s) { return s; });
    align([](const std::string& s) { return porter_stem(s); });

    size_t matches = 0;
    for (int r : hyp_to_ref)
        if (r >= 0) ++matches;
    if (matches == 0) return 0.0;

    double p = double(matches) / double(hyp.size());
    double r = double(matches) / double(ref.size());
    double f_mean = 10.0 * p * r / (r + 9.0 * p);

    size_t chunks = 0;
    int prev_ref = -2;
    bool in_chunk = false;
    for (size_t h = 0; h < hyp.size(); ++h) {
        if (hyp_to_ref[h] < 0) {
            in_chunk = false;
            continue;
        }
        if (!in_chunk || hyp_to_ref[h] != prev_ref + 1) ++chunks;
        in_chunk = true;
        prev_ref = hyp_to_ref[h];
    }

    double frag = double(chunks) / double(matches);
    double penalty = 0.5 * frag * frag * frag;
    return f_mean * (1.0 - penalty);
}

std::vector<double> cider(const std::vector<TokenList>& hyps,
                          const std::vector<std::vector<TokenList>>& refs,
                          const CiderOptions& options) {
    if (hyps.size() != refs.size())
        throw InvalidInput("cider: hypothesis and reference counts differ");
    if (hyps.empty()) throw InvalidInput("cider: empty corpus");
    for (const auto& r : refs)
        if (r.empty()) throw InvalidInput("cider: record without references");

    size_t max_n = options.max_n;
    // Document frequency: number of records whose reference set contains the
    // n-gram at least once.
    std::unordered_map<std::string, double> df;
    for (const auto& record_refs : refs) {
        std::unordered_set<std::string> seen;
        for (const TokenList& ref : record_refs)
            for (size_t n = 1; n <= max_n; ++n)
                for (const auto& [gram, count] : ngram_counts(ref, n)) seen.insert(gram);
        for (const auto& gram : seen) df[gram] += 1.0;
    }
    double log_docs = std::log(double(refs.size()));

    struct Vec {
        std::vector<NGramCounts> weighted; // tf-idf per n
        std::vector<double> norm;
        double length = 0.0;
    };
    auto to_vec = [&](const TokenList& tokens) {
        Vec v;
        v.weighted.resize(max_n);
        v.norm.assign(max_n, 0.0);
        v.length = double(tokens.size());
        for (size_t n = 1; n <= max_n; ++n) {
            for (const auto& [gram, count] : ngram_counts(tokens, n)) {
                auto it = df.find(gram);
                double d = it == df.end() ? 0.0 : it->second;
                double idf = log_docs - std::log(std::max(1.0, d));
                double w = count * idf;
                v.weighted[n - 1][gram] = w;
                v.norm[n - 1] += w * w;
            }
            v.norm[n - 1] = std::sqrt(v.norm[n - 1]);
        }
        return v;
    };

    std::vector<double> scores(hyps.size(), 0.0);
    for (size_t i = 0; i < hyps.size(); ++i) {
        Vec hv = to_vec(hyps[i]);
        double acc = 0.0;
        for (const TokenList& ref : refs[i]) {
            Vec rv = to_vec(ref);
            double delta = hv.length - rv.length;
            double len_pen = std::exp(-(delta * delta) / (2.0 * options.sigma * options.sigma));
            for (size_t n = 0; n < max_n; ++n) {
                double val = 0.0;
                for (const auto& [gram, hw] : hv.weighted[n]) {
                    auto it = rv.weighted[n].find(gram);
                    if (it != rv.weighted[n].end())
                        val += std::min(hw, it->second) * it->second;
                }
                if (hv.norm[n] > 0.0 && rv.norm[n] > 0.0)
                    val /= hv.norm[n] * rv.norm[n];
                acc += val * len_pen;
            }
        }
        scores[i] = options.scale * acc / (double(max_n) * double(refs[i].size()));
    }
    return scores;
}

double kendall_w(const std::vector<std::vector<double>>& rankings) {
    if (rankings.empty()) throw InvalidInput("kendall_w: no judges");
    size_t n = rankings.front().size();
    if (n < 2) throw InvalidInput("kendall_w: need at least two items");

    double tie_correction = 0.0;
    for (const auto& row : rankings) {
        if (row.size() != n) throw InvalidInput("kendall_w: ragged rank matrix");
        std::vector<double> sorted(row);
        std::sort(sorted.begin(), sorted.end());
        size_t i = 0;
        while (i < sorted.size()) {
            size_t j = i;
            while (j < sorted.size() && sorted[j] == sorted[i]) ++j;
            size_t t = j - i;
            // mid-rank of positions i+1 .. j (1-based)
            double expected = (double(i + 1) + double(j)) / 2.0;
            if (sorted[i] != expected)
                throw InvalidInput("kendall_w: row is not a mid-rank permutation of 1..n");
            tie_correction += double(t) * double(t) * double(t) - double(t);
            i = j;
        }
    }

    size_t m = rankings.size();
    double mean_sum = double(m) * double(n + 1) / 2.0;
    double s = 0.0;
    for (size_t j = 0; j < n; ++j) {
        double col = 0.0;
        for (size_t i = 0; i < m; ++i) col += rankings[i][j];
        s += (col - mean_sum) * (col - mean_sum);
    }
    double denom = double(m) * double(m) * (double(n) * double(n) * double(n) - double(n)) -
                   double(m) * tie_correction;
    if (denom <= 0.0)
        throw InvalidInput("kendall_w: degenerate ranking matrix (all items tied)");
    return 12.0 * s / denom;
}

} // namespace vtp
