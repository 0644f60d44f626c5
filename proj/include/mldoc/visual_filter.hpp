#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <vector>

#include "mldoc/corpus.hpp"

namespace mldoc {

using LabelScores = std::map<std::string, double>;

struct VisualFilterPolicy {
    std::vector<std::string> retain_labels;
    std::vector<std::string> filter_labels;
    std::string prompt_template = "a photo of a {label}";

    // 11 retain labels and 10 filter labels.
    static VisualFilterPolicy defaults();

    std::vector<std::string> all_labels() const;
    std::string prompt_for(const std::string& label) const;
    void validate() const;
};

enum class VisualDecision { keep, drop };

/// Drop iff the highest-scoring label is a filter label. Ties resolve to keep.
VisualDecision classify_visual(const LabelScores& scores, const VisualFilterPolicy& policy);

class VisualClassifier {
public:
    virtual ~VisualClassifier() = default;
    virtual LabelScores classify(const ImageRef& image, const VisualFilterPolicy& policy) const = 0;
};

struct FilterOutcome {
    std::vector<Chunk> chunks;
    std::vector<std::string> dropped;
    std::vector<std::string> warnings;
};

/// Removes image chunks classified as decorative. Classifier failures keep
/// the chunk and add a warning. `enabled = false` is the identity.
FilterOutcome filter_visual_noise(const std::vector<Chunk>& chunks,
                                  const VisualClassifier& classifier,
                                  const VisualFilterPolicy& policy, bool enabled,
                                  std::size_t parallelism = 4);

}  // namespace mldoc
