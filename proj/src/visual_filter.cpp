#include "mldoc/visual_filter.hpp"

#include <algorithm>
#include <limits>
#include <set>

#include "mldoc/errors.hpp"
#include "mldoc/parallel.hpp"

namespace mldoc {

VisualFilterPolicy VisualFilterPolicy::defaults() {
    VisualFilterPolicy p;
    p.retain_labels = {"table",       "chart",     "graph",        "diagram",
                       "map",         "infographic", "equation",   "flow chart",
                       "scatter plot", "bar chart", "form"};
    p.filter_labels = {"logo",         "banner", "advertisement", "poster", "cover",
                       "illustration", "background", "icon",      "photo",  "texture"};
    return p;
}

std::vector<std::string> VisualFilterPolicy::all_labels() const {
    std::vector<std::string> out = retain_labels;
    out.insert(out.end(), filter_labels.begin(), filter_labels.end());
    return out;
}

std::string VisualFilterPolicy::prompt_for(const std::string& label) const {
    std::string out = prompt_template;
    const std::string placeholder = "{label}";
    const auto pos = out.find(placeholder);
    if (pos == std::string::npos) return out + " " + label;
    out.replace(pos, placeholder.size(), label);
    return out;
}

void VisualFilterPolicy::validate() const {
    if (retain_labels.empty() || filter_labels.empty()) {
        throw ConfigError("visual filter needs non-empty retain and filter label sets");
    }
    const std::set<std::string> retain(retain_labels.begin(), retain_labels.end());
    for (const auto& label : filter_labels) {
        if (retain.count(label)) {
            throw ConfigError("label '" + label + "' is both retained and filtered");
        }
    }
}

VisualDecision classify_visual(const LabelScores& scores, const VisualFilterPolicy& policy) {
    auto best_of = [&](const std::vector<std::string>& labels) {
        double best = -std::numeric_limits<double>::infinity();
        for (const auto& label : labels) {
            auto it = scores.find(label);
            if (it == scores.end()) throw InputError("missing score for label '" + label + "'");
            best = std::max(best, it->second);
        }
        return best;
    };
    const double retain = best_of(policy.retain_labels);
    const double filter = best_of(policy.filter_labels);
    return filter > retain ? VisualDecision::drop : VisualDecision::keep;
}

FilterOutcome filter_visual_noise(const std::vector<Chunk>& chunks,
                                  const VisualClassifier& classifier,
                                  const VisualFilterPolicy& policy, bool enabled,
                                  std::size_t parallelism) {
    FilterOutcome out;
    if (!enabled) {
        out.chunks = chunks;
        return out;
    }
    policy.validate();

    enum class Verdict { keep, drop, failed };
    std::vector<Verdict> verdicts(chunks.size(), Verdict::keep);
    std::vector<std::string> failures(chunks.size());
    parallel_for(chunks.size(), parallelism, [&](std::size_t i) {
        const Chunk& c = chunks[i];
        if (c.modality != Modality::image || !c.image_ref) return;
        try {
            const auto decision = classify_visual(classifier.classify(*c.image_ref, policy), policy);
            verdicts[i] = decision == VisualDecision::drop ? Verdict::drop : Verdict::keep;
        } catch (const std::exception& e) {
            verdicts[i] = Verdict::failed;
            failures[i] = e.what();
        }
    });

    for (std::size_t i = 0; i < chunks.size(); ++i) {
        switch (verdicts[i]) {
            case Verdict::drop:
                out.dropped.push_back(chunks[i].chunk_id);
                break;
            case Verdict::failed:
                out.warnings.push_back("classifier failed on " + chunks[i].chunk_id + ": " +
                                       failures[i]);
                out.chunks.push_back(chunks[i]);
                break;
            case Verdict::keep:
                out.chunks.push_back(chunks[i]);
                break;
        }
    }
    return out;
}

}  // namespace mldoc
