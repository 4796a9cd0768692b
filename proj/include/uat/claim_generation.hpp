#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "uat/corpus.hpp"
#include "uat/encoder.hpp"
#include "uat/task_models.hpp"

namespace uat {

// Conditioning record for the generator. `claim` is empty at inference time.
struct GenerationInstance {
    std::vector<std::string> condition_tokens; // exactly 5
    std::string evidence;
    std::string claim;

    bool operator==(const GenerationInstance&) const = default;
};

// Wire format: t1,t2,t3,t4,t5||evidence||claim  (no spaces around separators).
std::string serialize_generation_instance(const GenerationInstance& gi);
GenerationInstance parse_generation_instance(std::string_view s);

// 1 token sampled from the claim + 4 sampled from the (non-special) vocab,
// order shuffled; evidence and claim copied through.
GenerationInstance build_training_instance(const ClaimInstance& instance, const Vocabulary& vocab,
                                           std::uint64_t seed);

// LM token ids: t1 , t2 , t3 , t4 , t5 || <evidence> || <claim> [EOS]
std::vector<int> generation_ids(const Vocabulary& v, const GenerationInstance& gi);
// The sampling prefix: everything up to and including the second "||".
std::vector<int> generation_prefix_ids(const Vocabulary& v, const GenerationInstance& gi);

// Early-stopped fine-tuning on serialized instances (next-token objective).
// Keeps the checkpoint with the best validation loss seen, the pre-training
// model included, so the result is never worse on validation than the input.
ConditionalLm fine_tune_generator(const ConditionalLm& lm,
                                  const std::vector<GenerationInstance>& data,
                                  const TrainHyper& hyper);

struct GeneratedClaim {
    std::string id;
    std::string text;
    std::vector<std::string> triggers; // the 5 condition tokens used
    std::string evidence_id;
    Label intended_label = Label::SUPPORTS;
    bool contains_trigger = false;
    NliLabel nli_verdict = NliLabel::NEUTRAL;
    bool kept = false;

    bool operator==(const GeneratedClaim&) const = default;
};

// num_samples decoded continuations after the second "||". Ids are
// "<evidence_id>#g<i>". Verdict fields are left for prune_claims.
std::vector<GeneratedClaim> generate_claims(const ConditionalLm& lm,
                                            const std::vector<std::string>& triggers,
                                            std::string_view evidence,
                                            std::string_view evidence_id,
                                            const SamplingParams& params);

// Annotates every claim in place (containment, NLI verdict, kept) and returns
// the kept ones. kept == contains_trigger AND nli maps to intended_label.
std::vector<GeneratedClaim> prune_claims(std::vector<GeneratedClaim>& claims,
                                         const std::vector<std::string>& triggers,
                                         std::string_view evidence, Label intended_label,
                                         const NliModel& nli);

void write_generated_claims(const std::vector<GeneratedClaim>& claims, const std::string& path);
std::vector<GeneratedClaim> read_generated_claims(const std::string& path);

} // namespace uat
