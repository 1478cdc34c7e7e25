#include "spotlight/metrics.hpp"

#include <algorithm>
#include <unordered_map>

#include "spotlight/answerer.hpp"
#include "spotlight/error.hpp"
#include "spotlight/text.hpp"

namespace spotlight {

int exact_match(std::string_view pred, std::span<const std::string> golds) {
    const auto p = normalize_answer(pred);
    for (const auto& g : golds) {
        if (normalize_answer(g) == p) return 1;
    }
    return 0;
}

namespace {

double f1_tokens(const std::vector<std::string>& pred, const std::vector<std::string>& gold) {
    if (pred.empty() && gold.empty()) return 1.0;
    if (pred.empty() || gold.empty()) return 0.0;
    std::unordered_map<std::string, int> counts;
    for (const auto& t : gold) ++counts[t];
    int overlap = 0;
    for (const auto& t : pred) {
        auto it = counts.find(t);
        if (it != counts.end() && it->second > 0) {
            --it->second;
            ++overlap;
        }
    }
    if (overlap == 0) return 0.0;
    const double precision = static_cast<double>(overlap) / static_cast<double>(pred.size());
    const double recall = static_cast<double>(overlap) / static_cast<double>(gold.size());
    return 2.0 * precision * recall / (precision + recall);
}

}  // namespace

double token_f1(std::string_view pred, std::span<const std::string> golds) {
    const auto p = normalize_answer(pred);
    double best = 0.0;
    for (const auto& g : golds) best = std::max(best, f1_tokens(p, normalize_answer(g)));
    return best;
}

std::size_t levenshtein(std::u32string_view a, std::u32string_view b) {
    if (a.size() < b.size()) std::swap(a, b);
    std::vector<std::size_t> row(b.size() + 1);
    for (std::size_t j = 0; j <= b.size(); ++j) row[j] = j;
    for (std::size_t i = 1; i <= a.size(); ++i) {
        std::size_t diag = row[0];
        row[0] = i;
        for (std::size_t j = 1; j <= b.size(); ++j) {
            const std::size_t up = row[j];
            const std::size_t cost = a[i - 1] == b[j - 1] ? 0 : 1;
            row[j] = std::min({up + 1, row[j - 1] + 1, diag + cost});
            diag = up;
        }
    }
    return row[b.size()];
}

std::size_t levenshtein(std::string_view a, std::string_view b) {
    return levenshtein(text::utf8_decode(a), text::utf8_decode(b));
}

double anls(std::string_view pred, std::span<const std::string> golds, double tau) {
    if (!(tau >= 0.0 && tau <= 1.0)) throw DomainError("ANLS threshold must lie in [0, 1]");
    const std::u32string p = text::utf8_decode(normalize_answer_string(pred));
    double best = 0.0;
    for (const auto& g : golds) {
        const std::u32string gs = text::utf8_decode(normalize_answer_string(g));
        if (p.empty() && gs.empty()) return 1.0;
        const double len = static_cast<double>(std::max<std::size_t>({p.size(), gs.size(), 1}));
        const double nl = static_cast<double>(levenshtein(p, gs)) / len;
        if (nl < tau) best = std::max(best, 1.0 - nl);
    }
    return best;
}

std::optional<char> extract_option(std::string_view pred) {
    const auto tokens = text::split_ws(text::strip_punct(pred, /*to_space=*/true));
    for (const auto& t : tokens) {
        if (t.size() == 1 && t[0] >= 'A' && t[0] <= 'D') return t[0];
    }
    for (const auto& t : tokens) {
        if (t.size() != 1) continue;
        if (t[0] >= 'b' && t[0] <= 'd') return static_cast<char>(t[0] - 'a' + 'A');
        if (t[0] == 'a' && tokens.size() == 1) return 'A';
    }
    return std::nullopt;
}

int mcq_accuracy(std::string_view pred, std::string_view gold_option) {
    const std::string gold = text::trim(gold_option);
    if (gold.size() != 1) return 0;
    const char g = static_cast<char>(gold[0] >= 'a' && gold[0] <= 'z' ? gold[0] - 'a' + 'A' : gold[0]);
    const auto opt = extract_option(pred);
    return opt && *opt == g ? 1 : 0;
}

QuestionScore score_question(std::string qid, std::string_view pred, std::span<const std::string> golds,
                             std::optional<std::string_view> gold_option, double tau) {
    QuestionScore s;
    s.qid = std::move(qid);
    s.em = exact_match(pred, golds);
    s.f1 = token_f1(pred, golds);
    s.anls = anls(pred, golds, tau);
    if (gold_option) s.acc = mcq_accuracy(pred, *gold_option);
    return s;
}

namespace {

struct Accumulator {
    std::size_t count = 0;
    double em = 0, f1 = 0, anls = 0;
    std::size_t acc_count = 0;
    double acc = 0;
    double select = 0, mask = 0, ask = 0;

    void add(const QuestionScore& s, const StageLatency* lat) {
        ++count;
        em += s.em;
        f1 += s.f1;
        anls += s.anls;
        if (s.acc) {
            ++acc_count;
            acc += *s.acc;
        }
        if (lat) {
            select += lat->select_ms;
            mask += lat->mask_ms;
            ask += lat->ask_ms;
        }
    }

    MetricMeans means() const {
        MetricMeans m;
        m.count = count;
        const double n = static_cast<double>(count);
        m.em = em / n;
        m.f1 = f1 / n;
        m.anls = anls / n;
        m.acc_count = acc_count;
        if (acc_count) m.acc = acc / static_cast<double>(acc_count);
        m.latency = {select / n, mask / n, ask / n};
        return m;
    }
};

}  // namespace

AggregateScores aggregate(std::span<const QuestionScore> scores, std::span<const std::string> domains,
                          std::span<const StageLatency> latencies) {
    if (scores.empty()) throw DomainError("cannot aggregate an empty score list");
    if (domains.size() != scores.size()) throw DomainError("scores and domains must align 1:1");
    if (!latencies.empty() && latencies.size() != scores.size()) {
        throw DomainError("scores and latencies must align 1:1");
    }
    std::map<std::string, Accumulator> per;
    Accumulator all;
    for (std::size_t k = 0; k < scores.size(); ++k) {
        const StageLatency* lat = latencies.empty() ? nullptr : &latencies[k];
        per[domains[k]].add(scores[k], lat);
        all.add(scores[k], lat);
    }
    AggregateScores out;
    for (const auto& [domain, acc] : per) out.per_domain.emplace(domain, acc.means());
    out.overall = all.means();
    return out;
}

}  // namespace spotlight
