#pragma once

#include <map>
#include <nlohmann/json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "mldoc/gateway.hpp"

namespace mldoc {

enum class EvidenceSource { TXT, LAY, CHA, TAB, FIG };
enum class PageScope { single, multi, unanswerable, cross_element };

std::string_view to_string(EvidenceSource s);
std::string_view to_string(PageScope s);
EvidenceSource parse_evidence_source(std::string_view s);
PageScope parse_page_scope(std::string_view s);

struct QaRecord {
    std::string question;
    std::string reference_answer;
    std::string doc_id;
    std::vector<int> evidence_pages;
    std::vector<EvidenceSource> evidence_sources;
    PageScope page_scope = PageScope::single;
};

nlohmann::json to_json(const QaRecord& r);
QaRecord qa_record_from_json(const nlohmann::json& j);
std::vector<QaRecord> parse_dataset(std::string_view jsonl, const std::string& source);

struct JudgeVerdict {
    int score = 0;
    std::string candidate_final;
    bool normalized_unanswerable = false;
    std::string raw_judge_output;
};

/// Accepts "Score: 1", a bare "1", or {"score": 1}. Throws JudgeParseError.
int parse_judge_score(std::string_view raw);

std::vector<ChatMessage> build_judge_prompt(const std::string& question,
                                            const std::string& reference,
                                            const std::string& candidate);

/// Temperature-0 judging with one retry on unparseable output.
JudgeVerdict judge(const ChatModel& judge_model, const QaRecord& record,
                   const std::string& candidate);

struct CategoryAccuracy {
    std::size_t n = 0;
    std::size_t correct = 0;
    double accuracy() const { return n == 0 ? 0.0 : static_cast<double>(correct) / n; }
};

struct AccuracyReport {
    double overall = 0.0;
    std::size_t n = 0;         // judged rows
    std::size_t correct = 0;
    std::size_t excluded = 0;  // rows without a verdict
    std::map<std::string, CategoryAccuracy> by_source;
    std::map<std::string, CategoryAccuracy> by_scope;
};

/// `verdicts[i]` belongs to `records[i]`; nullopt marks an excluded row.
/// Rows with several evidence sources count once under each source.
AccuracyReport aggregate_accuracy(const std::vector<std::optional<JudgeVerdict>>& verdicts,
                                  const std::vector<QaRecord>& records);

nlohmann::json to_json(const AccuracyReport& report);

}  // namespace mldoc
