#include "spotlight/mock_backends.hpp"

#include <cmath>
#include <fstream>

#include "spotlight/cache.hpp"
#include "spotlight/error.hpp"
#include "spotlight/text.hpp"

namespace spotlight {

using nlohmann::json;

std::string question_from_prompt(std::string_view prompt) {
    static constexpr std::string_view kMarker = "answer this question: ";
    const auto pos = prompt.find(kMarker);
    if (pos == std::string_view::npos) return {};
    auto rest = prompt.substr(pos + kMarker.size());
    return text::trim(rest.substr(0, rest.find('\n')));
}

MockMllmBackend::MockMllmBackend(const json& spec, std::string model_id) {
    if (!spec.is_object()) throw ConfigError("mock MLLM spec must be a JSON object");
    if (spec.contains("replies")) by_hash_ = spec["replies"].get<std::map<std::string, std::string>>();
    if (spec.contains("by_question")) by_question_ = spec["by_question"].get<std::map<std::string, std::string>>();
    if (spec.contains("default")) default_reply_ = spec["default"].get<std::string>();
    if (spec.contains("logits")) logits_ = spec["logits"].get<std::map<std::string, double>>();
    descriptor_.backend_id = "mock-" + sha256_hex(spec.dump()).substr(0, 16);
    descriptor_.model_id = std::move(model_id);
    descriptor_.supports_logits = logits_.has_value();
}

MockMllmBackend MockMllmBackend::from_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read mock reply file: " + path.string());
    const auto doc = json::parse(in, nullptr, false);
    if (doc.is_discarded()) throw ConfigError("mock reply file is not valid JSON: " + path.string());
    return MockMllmBackend(doc);
}

MllmReply MockMllmBackend::complete(const MllmRequest& request) {
    ++calls_;
    MllmReply reply;
    if (request.want_logits && logits_) reply.logits = logits_;
    if (auto it = by_hash_.find(sha256_hex(request.prompt)); it != by_hash_.end()) {
        reply.text = it->second;
        return reply;
    }
    if (auto it = by_question_.find(question_from_prompt(request.prompt)); it != by_question_.end()) {
        reply.text = it->second;
        return reply;
    }
    if (default_reply_) reply.text = *default_reply_;
    return reply;
}

UpliftOracleMllm::UpliftOracleMllm(std::vector<Entry> entries, double threshold) : threshold_(threshold) {
    std::string material = "uplift|" + std::to_string(threshold);
    for (auto& e : entries) {
        material += "|" + e.question + "|" + e.answer + "|" + sha256_hex(e.reference.pixels());
        std::string key = e.question;
        entries_.emplace(std::move(key), std::move(e));
    }
    descriptor_.backend_id = "uplift-oracle-" + sha256_hex(material).substr(0, 16);
    descriptor_.model_id = "uplift-oracle";
}

UpliftOracleMllm UpliftOracleMllm::from_json(const json& spec, const std::filesystem::path& base_dir) {
    std::vector<Entry> entries;
    for (const auto& e : spec.at("entries")) {
        const auto cell = e.at("cell").get<std::vector<int>>();
        if (cell.size() != 4) throw ConfigError("uplift oracle cell must be [x0,y0,x1,y1]");
        std::filesystem::path page = e.at("page").get<std::string>();
        if (page.is_relative()) page = base_dir / page;
        entries.push_back({e.at("question").get<std::string>(), e.at("answer").get<std::string>(), load_image(page),
                           PatchRect{1, 1, cell[0], cell[1], cell[2], cell[3]}});
    }
    return UpliftOracleMllm(std::move(entries), spec.value("threshold", 20.0));
}

double UpliftOracleMllm::blue_uplift(const PageImage& image, const PageImage& reference, const PatchRect& cell) {
    double diff = 0.0;
    for (int y = cell.y0; y < cell.y1; ++y)
        for (int x = cell.x0; x < cell.x1; ++x) diff += static_cast<double>(image.at(x, y).b) - reference.at(x, y).b;
    return diff / static_cast<double>(cell.area());
}

MllmReply UpliftOracleMllm::complete(const MllmRequest& request) {
    MllmReply reply;
    reply.text = std::string(kUnanswerablePhrase);
    const auto it = entries_.find(question_from_prompt(request.prompt));
    if (it == entries_.end()) return reply;
    const Entry& e = it->second;
    for (const auto& bytes : request.images) {
        const PageImage img = decode_image(bytes, "request-image");
        if (img.width() != e.reference.width() || img.height() != e.reference.height()) continue;
        if (blue_uplift(img, e.reference, e.cell) > threshold_) {
            reply.text = e.answer;
            break;
        }
    }
    return reply;
}

RegionSensitiveMllm::RegionSensitiveMllm(PageImage reference, PatchRect region, std::string answer, double base,
                                         double drop)
    : reference_(std::move(reference)), region_(region), answer_(std::move(answer)), base_(base), drop_(drop) {
    if (region_.x0 < 0 || region_.y0 < 0 || region_.x1 > reference_.width() || region_.y1 > reference_.height() ||
        region_.area() <= 0) {
        throw DomainError("region outside reference image");
    }
    if (!(base_ > drop_ && base_ < 1.0 && drop_ >= 0.0)) throw DomainError("need 0 <= drop < base < 1");
    descriptor_.backend_id = "region-mock-" + sha256_hex(reference_.pixels()).substr(0, 16);
    descriptor_.model_id = "region-mock";
    descriptor_.supports_logits = true;
}

double RegionSensitiveMllm::probability_for(const PageImage& image) const {
    long long changed = 0;
    for (int y = region_.y0; y < region_.y1; ++y)
        for (int x = region_.x0; x < region_.x1; ++x)
            if (!(image.at(x, y) == reference_.at(x, y))) ++changed;
    return base_ - drop_ * static_cast<double>(changed) / static_cast<double>(region_.area());
}

MllmReply RegionSensitiveMllm::complete(const MllmRequest& request) {
    if (request.images.empty()) throw DomainError("region mock needs an image");
    const PageImage img = decode_image(request.images.front(), "request-image");
    const double p = probability_for(img);
    MllmReply reply;
    reply.text = p >= 0.5 ? answer_ : "unknown";
    if (request.want_logits) {
        const std::string first = normalize_answer(answer_).empty() ? answer_ : normalize_answer(answer_).front();
        reply.logits = std::map<std::string, double>{{first, std::log(p)}, {"<other>", std::log1p(-p)}};
    }
    return reply;
}

}  // namespace spotlight
