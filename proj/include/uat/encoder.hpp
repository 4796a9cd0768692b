#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <string>
#include <string_view>
#include <unordered_map>
#include <variant>
#include <vector>

#include <Eigen/Dense>

namespace uat {

// One shared vocabulary for all task models. Ids 0..6 are fixed specials;
// the literal token "a" is always present but is an ordinary token.
struct Vocabulary {
    static constexpr int n_special = 7;

    std::vector<std::string> tokens;
    std::unordered_map<std::string, int> token_to_id;
    int pad_id = 0, unk_id = 1, mask_id = 2, sep_id = 3, eos_id = 4, comma_id = 5, pipes_id = 6;
    int a_id = -1;

    static const std::array<const char*, n_special>& special_tokens();
    static Vocabulary build(const std::vector<std::string>& corpus_tokens);
    // Reconstruct from a checkpoint's token list; validates the layout.
    static Vocabulary from_token_list(const std::vector<std::string>& toks);

    int size() const { return static_cast<int>(tokens.size()); }
    bool is_special(int id) const { return id >= 0 && id < n_special; }
    int id_or_unk(std::string_view tok) const;
    std::vector<int> encode(std::string_view text) const;
    std::vector<int> encode(const std::vector<std::string>& toks) const;
    bool operator==(const Vocabulary& o) const { return tokens == o.tokens; }
};

enum class OwnerTag : int { FC = 0, STS = 1, NLI = 2, LM = 3 };
enum class TaskKind : int { classifier = 0, linear_logit = 1, pair_score = 2, next_token = 3 };
enum class Activation : int { tanh_act = 0, identity = 1 };

const char* to_string(OwnerTag t);
const char* to_string(TaskKind k);
const char* to_string(Activation a);

// Training / evaluation items. The batch shape follows the task kind.
struct ClsExample {
    std::vector<int> ids;
    int target = 0;
};
struct PairExample {
    std::vector<int> a, b; // overrides and slot gradients act on side a
    double target = 5.0;   // score target in [0, 5]
};
struct SeqExample {
    std::vector<int> ids;
};
using Example = std::variant<ClsExample, PairExample, SeqExample>;

// Mean-of-embeddings pooling + 2-layer feed-forward head.
//   p = mean_i E[t_i];  h = act(W1 p + b1);  z = W2 h + b2
// pair_score stops at h (the sentence encoding); next_token pools the
// preceding tokens per position instead of the whole sequence.
struct EncoderModel {
    std::shared_ptr<const Vocabulary> vocab;
    OwnerTag owner = OwnerTag::FC;
    TaskKind kind = TaskKind::classifier;
    Activation act = Activation::tanh_act;
    int embed_dim = 0, hidden_dim = 0, out_dim = 0;
    int context_window = 48; // max total sequence length (next_token only)

    Eigen::MatrixXd E;  // |V| x d
    Eigen::MatrixXd W1; // h x d
    Eigen::VectorXd b1; // h
    Eigen::MatrixXd W2; // out x h
    Eigen::VectorXd b2; // out
};

EncoderModel make_model(std::shared_ptr<const Vocabulary> vocab, OwnerTag owner, TaskKind kind,
                        Activation act, int embed_dim, int hidden_dim, int out_dim,
                        int context_window, std::uint64_t init_seed);

// Feeding `vec` at one sequence position instead of the token's table row.
struct SlotOverride {
    int position = -1;
    Eigen::VectorXd vec;
};

// Hidden representation h of a token sequence (the sentence encoding).
Eigen::VectorXd encode_hidden(const EncoderModel& m, const std::vector<int>& ids,
                              const SlotOverride* ov = nullptr);

Eigen::VectorXd apply_activation(const EncoderModel& m, const Eigen::VectorXd& preact);

double instance_loss(const EncoderModel& m, const Example& ex, const SlotOverride* ov = nullptr);

// Mean loss over the batch.
double forward_loss(const EncoderModel& m, const std::vector<Example>& batch,
                    const SlotOverride* ov = nullptr);

// Analytic gradient of forward_loss w.r.t. the embedding vector at each
// requested position (each instance differentiates its own fed vector),
// averaged over the batch. One row per position.
Eigen::MatrixXd grad_wrt_embeddings(const EncoderModel& m, const std::vector<Example>& batch,
                                    const std::vector<int>& positions);

// Same, but every instance is fed the shared vector v at `position`.
Eigen::VectorXd grad_wrt_slot(const EncoderModel& m, const std::vector<Example>& batch,
                              int position, const Eigen::VectorXd& v);

// Central finite differences of forward_loss around v at `position`.
Eigen::VectorXd finite_difference_grad(const EncoderModel& m, const std::vector<Example>& batch,
                                       int position, const Eigen::VectorXd& v, double epsilon);

struct ParamGrads {
    Eigen::MatrixXd E, W1, W2;
    Eigen::VectorXd b1, b2;
};

// Mean batch loss plus gradients for every parameter tensor.
double loss_and_param_grads(const EncoderModel& m, const std::vector<Example>& batch,
                            ParamGrads& out);

struct TrainHyper {
    double lr = 1e-2;
    int batch_size = 8;
    int epochs = 20;
    std::uint64_t seed = 0;
};

struct TrainTrace {
    std::vector<double> epoch_losses; // full-train loss after each epoch
    int best_epoch = -1;              // 0-based; -1 when epochs == 0
    double best_loss = 0.0;
};

// One shuffled pass of minibatch SGD over `data` in the given order.
void run_sgd_epoch(EncoderModel& m, const std::vector<Example>& data,
                   const std::vector<int>& order, double lr, int batch_size, int epoch_index);

// Plain SGD; retains the parameters of the best epoch by full-train loss.
TrainTrace train_model(EncoderModel& m, const std::vector<Example>& data, const TrainHyper& hyper);

void save_checkpoint(const EncoderModel& m, const std::string& path);
EncoderModel load_checkpoint(const std::string& path);

} // namespace uat
