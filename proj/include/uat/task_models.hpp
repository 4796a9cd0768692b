#pragma once

#include <array>
#include <cstdint>
#include <string_view>
#include <utility>
#include <vector>

#include "uat/corpus.hpp"
#include "uat/encoder.hpp"
#include "uat/rng.hpp"

namespace uat {

struct FactCheckModel {
    EncoderModel m;
};
struct StsModel {
    EncoderModel m;
};
struct NliModel {
    EncoderModel m;
};
struct ConditionalLm {
    EncoderModel m;
};

// Class indices deliberately mirror Label (S=0, R=1, NEI=2) so the NLI->FC
// label map is the identity on the underlying ints.
enum class NliLabel : int { ENTAILMENT = 0, CONTRADICTION = 1, NEUTRAL = 2 };

const char* to_string(NliLabel l);
Label nli_to_fc(NliLabel l);
NliLabel fc_to_nli(Label l);

FactCheckModel make_fc_model(std::shared_ptr<const Vocabulary> v, int embed_dim, int hidden_dim,
                             std::uint64_t seed);
StsModel make_sts_model(std::shared_ptr<const Vocabulary> v, int embed_dim, int hidden_dim,
                        std::uint64_t seed);
NliModel make_nli_model(std::shared_ptr<const Vocabulary> v, int embed_dim, int hidden_dim,
                        std::uint64_t seed);
ConditionalLm make_lm_model(std::shared_ptr<const Vocabulary> v, int embed_dim, int hidden_dim,
                            int context_window, std::uint64_t seed);

// Classifier input packing shared by FC and NLI: claim [SEP] evidence.
std::vector<int> pack_pair(const Vocabulary& v, std::string_view claim, std::string_view evidence);

std::pair<Label, std::array<double, 3>> fc_predict(const FactCheckModel& fc,
                                                   std::string_view claim,
                                                   std::string_view evidence);

// 5 * max(0, cosine(enc a, enc b)); exactly 5 for id-identical texts.
double sts_score(const StsModel& sts, std::string_view a, std::string_view b);
// L' = (5 - sts_score)^2 / 25, in [0, 1].
double sts_loss(const StsModel& sts, std::string_view original, std::string_view triggered);

NliLabel nli_label(const NliModel& nli, std::string_view evidence, std::string_view claim);

// exp(mean per-position NLL).
double lm_perplexity(const ConditionalLm& lm, std::string_view text);

struct SamplingParams {
    std::uint64_t seed = 0;
    double temperature = 1.0;
    int max_length = 12;
    int num_samples = 20;
};

// One sampled continuation (EOS terminates and is not returned). The stream
// form lets callers draw several samples from one RNG.
std::vector<int> lm_generate_stream(const ConditionalLm& lm, const std::vector<int>& prefix,
                                    int max_length, double temperature, Rng& rng);
std::vector<int> lm_generate(const ConditionalLm& lm, const std::vector<int>& prefix,
                             const SamplingParams& params);

// Training-example builders for the toy pipeline.
std::vector<Example> fc_examples(const Vocabulary& v, const Dataset& d);
std::vector<Example> nli_examples(const Vocabulary& v, const Dataset& d);
// Pairs (self, cross-claim, token-prepended) with 5*Jaccard targets.
std::vector<Example> sts_examples(const Vocabulary& v, const Dataset& d, std::uint64_t seed);
// Plain claim sequences with a trailing EOS (fluency model for PPL).
std::vector<Example> lm_claim_examples(const Vocabulary& v, const Dataset& d);

} // namespace uat
