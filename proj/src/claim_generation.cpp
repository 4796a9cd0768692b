#include "uat/claim_generation.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>

#include <nlohmann/json.hpp>

#include "uat/error.hpp"
#include "uat/rng.hpp"
#include "uat/text.hpp"

namespace uat {

using nlohmann::json;

namespace {

constexpr std::string_view kSep = "||";

void check_condition_token(const std::string& t) {
    if (t.empty()) throw ValidationError("empty condition token");
    if (t.find(',') != std::string::npos || t.find(kSep) != std::string::npos)
        throw ValidationError("condition token collides with a separator: " + t);
    for (char c : t)
        if (std::isspace(static_cast<unsigned char>(c)))
            throw ValidationError("condition token contains whitespace: " + t);
}

void check_section(const std::string& s, const char* what) {
    if (s.find(kSep) != std::string::npos)
        throw ValidationError(std::string(what) + " contains the section separator");
}

} // namespace

std::string serialize_generation_instance(const GenerationInstance& gi) {
    if (gi.condition_tokens.size() != 5)
        throw ValidationError("expected exactly 5 condition tokens, got " +
                              std::to_string(gi.condition_tokens.size()));
    for (const auto& t : gi.condition_tokens) check_condition_token(t);
    if (gi.evidence.empty()) throw ValidationError("evidence must be non-empty");
    check_section(gi.evidence, "evidence");
    check_section(gi.claim, "claim");
    std::string out;
    for (std::size_t i = 0; i < 5; ++i) {
        if (i) out += ',';
        out += gi.condition_tokens[i];
    }
    out += kSep;
    out += gi.evidence;
    out += kSep;
    out += gi.claim;
    return out;
}

GenerationInstance parse_generation_instance(std::string_view s) {
    std::vector<std::string> sections;
    std::size_t pos = 0;
    while (true) {
        const std::size_t hit = s.find(kSep, pos);
        if (hit == std::string_view::npos) {
            sections.emplace_back(s.substr(pos));
            break;
        }
        sections.emplace_back(s.substr(pos, hit - pos));
        pos = hit + kSep.size();
    }
    if (sections.size() != 3)
        throw ParseError("expected 3 sections separated by \"||\", got " +
                         std::to_string(sections.size()));

    GenerationInstance gi;
    std::string_view head = sections[0];
    std::size_t start = 0;
    while (true) {
        const std::size_t comma = head.find(',', start);
        if (comma == std::string_view::npos) {
            gi.condition_tokens.emplace_back(head.substr(start));
            break;
        }
        gi.condition_tokens.emplace_back(head.substr(start, comma - start));
        start = comma + 1;
    }
    if (gi.condition_tokens.size() != 5)
        throw ParseError("expected exactly 5 condition tokens, got " +
                         std::to_string(gi.condition_tokens.size()));
    for (const auto& t : gi.condition_tokens) check_condition_token(t);
    gi.evidence = std::move(sections[1]);
    if (gi.evidence.empty()) throw ParseError("evidence section is empty");
    gi.claim = std::move(sections[2]);
    return gi;
}

GenerationInstance build_training_instance(const ClaimInstance& instance, const Vocabulary& vocab,
                                           std::uint64_t seed) {
    const auto claim_toks = tokenize(instance.claim);
    if (claim_toks.empty()) throw ValidationError("claim has no tokens: " + instance.id);
    const int n_content = vocab.size() - Vocabulary::n_special;
    if (n_content < 1) throw ConfigError("vocabulary has no content tokens");

    Rng rng(derive_seed(seed, "generation.condition"));
    GenerationInstance gi;
    gi.condition_tokens.push_back(claim_toks[rng.index(claim_toks.size())]);
    for (int i = 0; i < 4; ++i) {
        const int id = Vocabulary::n_special + static_cast<int>(rng.below(n_content));
        gi.condition_tokens.push_back(vocab.tokens[id]);
    }
    rng.shuffle(gi.condition_tokens);
    gi.evidence = instance.evidence;
    gi.claim = instance.claim;
    return gi;
}

std::vector<int> generation_prefix_ids(const Vocabulary& v, const GenerationInstance& gi) {
    if (gi.condition_tokens.size() != 5)
        throw ValidationError("expected exactly 5 condition tokens");
    if (gi.evidence.empty()) throw ValidationError("evidence must be non-empty");
    std::vector<int> ids;
    for (std::size_t i = 0; i < 5; ++i) {
        if (i) ids.push_back(v.comma_id);
        ids.push_back(v.id_or_unk(gi.condition_tokens[i]));
    }
    ids.push_back(v.pipes_id);
    const auto ev = v.encode(gi.evidence);
    ids.insert(ids.end(), ev.begin(), ev.end());
    ids.push_back(v.pipes_id);
    return ids;
}

std::vector<int> generation_ids(const Vocabulary& v, const GenerationInstance& gi) {
    auto ids = generation_prefix_ids(v, gi);
    const auto cl = v.encode(gi.claim);
    ids.insert(ids.end(), cl.begin(), cl.end());
    ids.push_back(v.eos_id);
    return ids;
}

ConditionalLm fine_tune_generator(const ConditionalLm& lm,
                                  const std::vector<GenerationInstance>& data,
                                  const TrainHyper& hyper) {
    if (data.empty()) throw ValidationError("no generation instances to fine-tune on");
    if (hyper.lr <= 0.0) throw ConfigError("learning rate must be > 0");
    if (hyper.batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (hyper.epochs < 0) throw ConfigError("epochs must be >= 0");
    const Vocabulary& v = *lm.m.vocab;

    std::vector<Example> all;
    all.reserve(data.size());
    for (const auto& gi : data) all.push_back(SeqExample{generation_ids(v, gi)});

    Rng rng(derive_seed(hyper.seed, "generator.finetune"));
    std::vector<int> order(all.size());
    std::iota(order.begin(), order.end(), 0);
    rng.shuffle(order);

    // 90/10 split; with a tiny corpus everything is both train and validation.
    std::vector<Example> train, val;
    const std::size_t n_val = std::max<std::size_t>(1, all.size() / 10);
    if (all.size() < 2) {
        train = all;
        val = all;
    } else {
        for (std::size_t i = 0; i < order.size(); ++i)
            (i < n_val ? val : train).push_back(all[order[i]]);
    }

    ConditionalLm cur = lm;
    ConditionalLm best = lm;
    double best_val = forward_loss(cur.m, val);
    constexpr int patience = 3;
    int stale = 0;

    std::vector<int> epoch_order(train.size());
    std::iota(epoch_order.begin(), epoch_order.end(), 0);
    for (int epoch = 0; epoch < hyper.epochs; ++epoch) {
        rng.shuffle(epoch_order);
        run_sgd_epoch(cur.m, train, epoch_order, hyper.lr, hyper.batch_size, epoch);
        const double vl = forward_loss(cur.m, val);
        if (vl < best_val) {
            best_val = vl;
            best = cur;
            stale = 0;
        } else if (++stale >= patience) {
            break;
        }
    }
    return best;
}

std::vector<GeneratedClaim> generate_claims(const ConditionalLm& lm,
                                            const std::vector<std::string>& triggers,
                                            std::string_view evidence,
                                            std::string_view evidence_id,
                                            const SamplingParams& params) {
    if (triggers.size() != 5) throw ValidationError("expected exactly 5 trigger tokens");
    if (evidence.empty()) throw ValidationError("evidence must be non-empty");
    if (!(params.temperature > 0.0)) throw ConfigError("temperature must be > 0");
    if (params.max_length < 1) throw ConfigError("max_length must be >= 1");
    if (params.num_samples < 1) throw ConfigError("num_samples must be >= 1");

    const Vocabulary& v = *lm.m.vocab;
    GenerationInstance gi;
    gi.condition_tokens = triggers;
    gi.evidence = std::string(evidence);
    const auto prefix = generation_prefix_ids(v, gi);

    Rng rng(derive_seed(params.seed, "claims.sample"));
    std::vector<GeneratedClaim> out;
    out.reserve(params.num_samples);
    for (int s = 0; s < params.num_samples; ++s) {
        const auto ids = lm_generate_stream(lm, prefix, params.max_length, params.temperature, rng);
        std::vector<std::string> toks;
        toks.reserve(ids.size());
        for (int id : ids) toks.push_back(v.tokens[id]);
        GeneratedClaim c;
        c.id = std::string(evidence_id) + "#g" + std::to_string(s);
        c.text = join(toks, " ");
        c.triggers = triggers;
        c.evidence_id = std::string(evidence_id);
        out.push_back(std::move(c));
    }
    return out;
}

std::vector<GeneratedClaim> prune_claims(std::vector<GeneratedClaim>& claims,
                                         const std::vector<std::string>& triggers,
                                         std::string_view evidence, Label intended_label,
                                         const NliModel& nli) {
    if (triggers.size() != 5) throw ValidationError("expected exactly 5 trigger tokens");
    std::vector<GeneratedClaim> kept;
    for (auto& c : claims) {
        c.intended_label = intended_label;
        c.contains_trigger = false;
        for (const auto& t : triggers)
            if (contains_whole_token(c.text, t)) {
                c.contains_trigger = true;
                break;
            }
        c.nli_verdict = nli_label(nli, evidence, c.text);
        c.kept = c.contains_trigger && nli_to_fc(c.nli_verdict) == intended_label;
        if (c.kept) kept.push_back(c);
    }
    return kept;
}

namespace {

NliLabel nli_from_string(std::string_view s) {
    if (s == "ENTAILMENT") return NliLabel::ENTAILMENT;
    if (s == "CONTRADICTION") return NliLabel::CONTRADICTION;
    if (s == "NEUTRAL") return NliLabel::NEUTRAL;
    throw ValidationError("unknown NLI label: " + std::string(s));
}

} // namespace

void write_generated_claims(const std::vector<GeneratedClaim>& claims, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write claims file " + path);
    for (const auto& c : claims) {
        json j;
        j["id"] = c.id;
        j["text"] = c.text;
        j["triggers"] = c.triggers;
        j["evidence_id"] = c.evidence_id;
        j["intended_label"] = to_string(c.intended_label);
        j["contains_trigger"] = c.contains_trigger;
        j["nli_verdict"] = to_string(c.nli_verdict);
        j["kept"] = c.kept;
        out << j.dump() << '\n';
    }
    if (!out) throw IoError("claims write failed: " + path);
}

std::vector<GeneratedClaim> read_generated_claims(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open claims file " + path);
    std::vector<GeneratedClaim> out;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::parse_error& e) {
            throw ParseError(path + ":" + std::to_string(lineno) + ": " + e.what());
        }
        try {
            GeneratedClaim c;
            c.id = j.at("id").get<std::string>();
            c.text = j.at("text").get<std::string>();
            c.triggers = j.at("triggers").get<std::vector<std::string>>();
            c.evidence_id = j.at("evidence_id").get<std::string>();
            c.intended_label = label_from_string(j.at("intended_label").get<std::string>());
            c.contains_trigger = j.at("contains_trigger").get<bool>();
            c.nli_verdict = nli_from_string(j.at("nli_verdict").get<std::string>());
            c.kept = j.at("kept").get<bool>();
            out.push_back(std::move(c));
        } catch (const json::exception& e) {
            throw ParseError(path + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
    return out;
}

} // namespace uat
