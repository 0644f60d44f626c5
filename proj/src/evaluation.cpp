#include "mldoc/evaluation.hpp"

#include <regex>

#include "mldoc/answer.hpp"
#include "mldoc/io.hpp"
#include "mldoc/prompts.hpp"

namespace mldoc {

using json = nlohmann::json;

std::string_view to_string(EvidenceSource s) {
    switch (s) {
        case EvidenceSource::TXT: return "TXT";
        case EvidenceSource::LAY: return "LAY";
        case EvidenceSource::CHA: return "CHA";
        case EvidenceSource::TAB: return "TAB";
        case EvidenceSource::FIG: return "FIG";
    }
    return "TXT";
}

std::string_view to_string(PageScope s) {
    switch (s) {
        case PageScope::single: return "single";
        case PageScope::multi: return "multi";
        case PageScope::unanswerable: return "unanswerable";
        case PageScope::cross_element: return "cross_element";
    }
    return "single";
}

EvidenceSource parse_evidence_source(std::string_view s) {
    for (auto v : {EvidenceSource::TXT, EvidenceSource::LAY, EvidenceSource::CHA,
                   EvidenceSource::TAB, EvidenceSource::FIG}) {
        if (s == to_string(v)) return v;
    }
    throw InputError("unknown evidence source '" + std::string(s) + "'");
}

PageScope parse_page_scope(std::string_view s) {
    for (auto v : {PageScope::single, PageScope::multi, PageScope::unanswerable,
                   PageScope::cross_element}) {
        if (s == to_string(v)) return v;
    }
    throw InputError("unknown page scope '" + std::string(s) + "'");
}

json to_json(const QaRecord& r) {
    json sources = json::array();
    for (auto s : r.evidence_sources) sources.push_back(to_string(s));
    return {{"question", r.question},         {"reference_answer", r.reference_answer},
            {"doc_id", r.doc_id},             {"evidence_pages", r.evidence_pages},
            {"evidence_sources", sources},    {"page_scope", to_string(r.page_scope)}};
}

QaRecord qa_record_from_json(const json& j) {
    try {
        QaRecord r;
        r.question = j.at("question").get<std::string>();
        if (r.question.empty()) throw InputError("dataset row with empty question");
        r.reference_answer = j.at("reference_answer").get<std::string>();
        r.doc_id = j.value("doc_id", "");
        r.evidence_pages = j.value("evidence_pages", std::vector<int>{});
        for (const auto& s : j.value("evidence_sources", std::vector<std::string>{})) {
            r.evidence_sources.push_back(parse_evidence_source(s));
        }
        r.page_scope = parse_page_scope(j.value("page_scope", "single"));
        return r;
    } catch (const json::exception& e) {
        throw InputError(std::string("malformed dataset row: ") + e.what());
    }
}

std::vector<QaRecord> parse_dataset(std::string_view jsonl, const std::string& source) {
    std::vector<QaRecord> out;
    for (const auto& row : parse_jsonl(jsonl, source)) out.push_back(qa_record_from_json(row));
    return out;
}

int parse_judge_score(std::string_view raw) {
    const std::string text(raw);
    // {"score": 1}
    for (auto pos = text.find('{'); pos != std::string::npos; pos = text.find('{', pos + 1)) {
        const auto end = text.find('}', pos);
        if (end == std::string::npos) break;
        const json j = json::parse(text.substr(pos, end - pos + 1), nullptr, false);
        if (j.is_object()) {
            const auto it = j.find("score");
            if (it != j.end()) {
                if (it->is_number_integer() && (*it == 0 || *it == 1)) return it->get<int>();
                if (it->is_string() && (*it == "0" || *it == "1")) return it->get<std::string>() == "1";
            }
        }
    }
    static const std::regex labeled(R"(score\s*\**\s*[:=]?\s*\**\s*([01])\b)", std::regex::icase);
    std::smatch m;
    if (std::regex_search(text, m, labeled)) return m[1] == "1" ? 1 : 0;
    static const std::regex bare(R"(^\s*\**\s*([01])\s*\**\s*\.?\s*$)");
    if (std::regex_match(text, m, bare)) return m[1] == "1" ? 1 : 0;
    throw JudgeParseError("cannot find a 0/1 score in judge output", text);
}

std::vector<ChatMessage> build_judge_prompt(const std::string& question,
                                            const std::string& reference,
                                            const std::string& candidate) {
    return {system_message(std::string(prompts::evaluation())),
            ChatMessage{Role::user,
                        {TextPart{"Question: " + question + "\nReference Answer: " + reference +
                                  "\nCandidate Answer: " + candidate}}}};
}

JudgeVerdict judge(const ChatModel& judge_model, const QaRecord& record,
                   const std::string& candidate) {
    const auto prompt = build_judge_prompt(record.question, record.reference_answer, candidate);
    DecodeParams decode;
    decode.temperature = 0.0;
    decode.max_output_tokens = 256;
    std::string raw;
    for (int attempt = 0; attempt < 2; ++attempt) {
        raw = judge_model.complete(prompt, decode);
        try {
            JudgeVerdict v;
            v.score = parse_judge_score(raw);
            v.candidate_final = extract_final_answer(candidate);
            v.normalized_unanswerable = is_unanswerable_equivalent(v.candidate_final);
            v.raw_judge_output = raw;
            return v;
        } catch (const JudgeParseError&) {
            if (attempt == 1) throw;
        }
    }
    throw JudgeParseError("unreachable", raw);
}

AccuracyReport aggregate_accuracy(const std::vector<std::optional<JudgeVerdict>>& verdicts,
                                  const std::vector<QaRecord>& records) {
    if (verdicts.size() != records.size()) {
        throw InputError("verdicts and records are not aligned");
    }
    AccuracyReport report;
    for (std::size_t i = 0; i < records.size(); ++i) {
        if (!verdicts[i]) {
            ++report.excluded;
            continue;
        }
        const bool correct = verdicts[i]->score == 1;
        ++report.n;
        report.correct += correct;
        for (auto s : records[i].evidence_sources) {
            auto& cat = report.by_source[std::string(to_string(s))];
            ++cat.n;
            cat.correct += correct;
        }
        auto& scope = report.by_scope[std::string(to_string(records[i].page_scope))];
        ++scope.n;
        scope.correct += correct;
    }
    report.overall = report.n == 0 ? 0.0 : static_cast<double>(report.correct) / report.n;
    return report;
}

json to_json(const AccuracyReport& report) {
    auto categories = [](const std::map<std::string, CategoryAccuracy>& m) {
        json out = json::object();
        for (const auto& [name, c] : m) {
            out[name] = {{"accuracy", c.accuracy()}, {"n", c.n}, {"correct", c.correct}};
        }
        return out;
    };
    return {{"overall", report.overall},
            {"by_source", categories(report.by_source)},
            {"by_scope", categories(report.by_scope)},
            {"n", report.n},
            {"correct", report.correct},
            {"excluded", report.excluded}};
}

}  // namespace mldoc
