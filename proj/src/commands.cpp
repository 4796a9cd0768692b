#include "uat/commands.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>

#include <nlohmann/json.hpp>

#include "uat/claim_generation.hpp"
#include "uat/error.hpp"
#include "uat/evaluation.hpp"
#include "uat/rng.hpp"
#include "uat/text.hpp"

namespace uat {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void ensure_dir(const std::string& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create output directory " + dir + ": " + ec.message());
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path);
    out << text;
    if (!out) throw IoError("write failed: " + path);
}

void require_file(const std::string& path, const char* hint) {
    if (!fs::exists(path)) throw ConfigError("missing " + path + " (" + hint + ")");
}

struct Corpora {
    Dataset train, dev;
};

Corpora materialize_corpora(const RunConfig& cfg) {
    Corpora c;
    if (!cfg.corpus_path.empty()) {
        if (!fs::exists(cfg.corpus_path))
            throw ConfigError("corpus path does not exist: " + cfg.corpus_path);
        Dataset all = load_jsonl(cfg.corpus_path);
        if (all.instances.size() < 2)
            throw ValidationError("corpus needs at least 2 instances to split");
        std::vector<int> order(all.instances.size());
        std::iota(order.begin(), order.end(), 0);
        Rng rng(derive_seed(cfg.seed, "corpus.split"));
        rng.shuffle(order);
        const std::size_t n_dev = std::max<std::size_t>(1, order.size() / 5);
        c.train.name = all.name + "-train";
        c.dev.name = all.name + "-dev";
        for (std::size_t i = 0; i < order.size(); ++i)
            (i < n_dev ? c.dev : c.train).instances.push_back(all.instances[order[i]]);
    } else {
        c.train = synthesize_toy_corpus(derive_seed(cfg.seed, "corpus.train"),
                                        cfg.synth_per_class, cfg.synth_vocab_size);
        c.train.name = "toy-train";
        c.dev = synthesize_toy_corpus(derive_seed(cfg.seed, "corpus.dev"), cfg.synth_per_class,
                                      cfg.synth_vocab_size);
        c.dev.name = "toy-dev";
    }
    return c;
}

std::shared_ptr<const Vocabulary> build_vocab(const Corpora& c) {
    std::vector<std::string> toks;
    for (const Dataset* d : {&c.train, &c.dev})
        for (const auto& inst : d->instances) {
            for (auto& t : tokenize(inst.claim)) toks.push_back(std::move(t));
            for (auto& t : tokenize(inst.evidence)) toks.push_back(std::move(t));
        }
    return std::make_shared<Vocabulary>(Vocabulary::build(toks));
}

json trace_json(const TrainTrace& tr) {
    json j;
    j["epoch_losses"] = tr.epoch_losses;
    j["best_epoch"] = tr.best_epoch;
    j["best_loss"] = tr.best_loss;
    return j;
}

double dev_fc_f1(const FactCheckModel& fc, const Dataset& dev) {
    std::vector<Label> preds, golds;
    for (const auto& inst : dev.instances) {
        preds.push_back(fc_predict(fc, inst.claim, inst.evidence).first);
        golds.push_back(inst.label);
    }
    return macro_f1(preds, golds);
}

double dev_nli_f1(const NliModel& nli, const Dataset& dev) {
    std::vector<Label> preds, golds;
    for (const auto& inst : dev.instances) {
        preds.push_back(nli_to_fc(nli_label(nli, inst.evidence, inst.claim)));
        golds.push_back(inst.label);
    }
    return macro_f1(preds, golds);
}

std::vector<AttackDirection> resolve_directions(const std::vector<AttackDirection>& requested) {
    return requested.empty() ? all_directions() : requested;
}

FactCheckModel load_fc(const RunPaths& p) {
    require_file(p.fc_ckpt(), "run `train` first");
    return FactCheckModel{load_checkpoint(p.fc_ckpt())};
}

} // namespace

void cmd_train(const RunConfig& cfg) {
    validate(cfg);
    ensure_dir(cfg.out_dir);
    const RunPaths p{cfg.out_dir};

    const Corpora corpora = materialize_corpora(cfg);
    write_jsonl(corpora.train, p.corpus_train());
    write_jsonl(corpora.dev, p.corpus_dev());
    auto vocab = build_vocab(corpora);
    std::printf("corpus: %zu train / %zu dev instances, vocab %d\n",
                corpora.train.instances.size(), corpora.dev.instances.size(), vocab->size());

    json metrics;

    FactCheckModel fc = make_fc_model(vocab, cfg.fc.embed_dim, cfg.fc.hidden_dim,
                                      derive_seed(cfg.seed, "init.fc"));
    {
        TrainHyper h = cfg.fc.train;
        h.seed = derive_seed(cfg.seed, "train.fc");
        const TrainTrace tr = train_model(fc.m, fc_examples(*vocab, corpora.train), h);
        save_checkpoint(fc.m, p.fc_ckpt());
        metrics["fc"] = trace_json(tr);
        metrics["fc"]["dev_macro_f1"] = dev_fc_f1(fc, corpora.dev);
        std::printf("fc: best epoch %d loss %.4f dev F1 %.3f\n", tr.best_epoch, tr.best_loss,
                    metrics["fc"]["dev_macro_f1"].get<double>());
    }

    {
        StsModel sts = make_sts_model(vocab, cfg.sts.embed_dim, cfg.sts.hidden_dim,
                                      derive_seed(cfg.seed, "init.sts"));
        TrainHyper h = cfg.sts.train;
        h.seed = derive_seed(cfg.seed, "train.sts");
        const TrainTrace tr = train_model(sts.m, sts_examples(*vocab, corpora.train, cfg.seed), h);
        save_checkpoint(sts.m, p.sts_ckpt());
        metrics["sts"] = trace_json(tr);
        std::printf("sts: best epoch %d loss %.4f\n", tr.best_epoch, tr.best_loss);
    }

    {
        NliModel nli = make_nli_model(vocab, cfg.nli.embed_dim, cfg.nli.hidden_dim,
                                      derive_seed(cfg.seed, "init.nli"));
        TrainHyper h = cfg.nli.train;
        h.seed = derive_seed(cfg.seed, "train.nli");
        const TrainTrace tr = train_model(nli.m, nli_examples(*vocab, corpora.train), h);
        save_checkpoint(nli.m, p.nli_ckpt());
        metrics["nli"] = trace_json(tr);
        metrics["nli"]["dev_macro_f1"] = dev_nli_f1(nli, corpora.dev);
        std::printf("nli: best epoch %d loss %.4f dev F1 %.3f\n", tr.best_epoch, tr.best_loss,
                    metrics["nli"]["dev_macro_f1"].get<double>());
    }

    {
        ConditionalLm lm = make_lm_model(vocab, cfg.lm.embed_dim, cfg.lm.hidden_dim,
                                         cfg.lm_context_window, derive_seed(cfg.seed, "init.lm"));
        TrainHyper h = cfg.lm.train;
        h.seed = derive_seed(cfg.seed, "train.lm");
        const TrainTrace tr = train_model(lm.m, lm_claim_examples(*vocab, corpora.train), h);
        save_checkpoint(lm.m, p.lm_ckpt());
        metrics["lm"] = trace_json(tr);
        std::printf("lm: best epoch %d loss %.4f\n", tr.best_epoch, tr.best_loss);
    }

    json gens = json::object();
    for (Label c : {Label::SUPPORTS, Label::REFUTES, Label::NEI}) {
        const auto insts = instances_with_label(corpora.train, c);
        if (insts.empty())
            throw ValidationError(std::string("no training instances of class ") + label_short(c));
        std::vector<GenerationInstance> data;
        data.reserve(insts.size());
        for (const auto& inst : insts)
            data.push_back(
                build_training_instance(inst, *vocab, derive_seed(cfg.seed, "gen.cond." + inst.id)));
        ConditionalLm g0 =
            make_lm_model(vocab, cfg.lm.embed_dim, cfg.lm.hidden_dim, cfg.lm_context_window,
                          derive_seed(cfg.seed, std::string("init.gen.") + label_short(c)));
        TrainHyper h = cfg.generator_train;
        h.seed = derive_seed(cfg.seed, std::string("train.gen.") + label_short(c));
        const ConditionalLm g = fine_tune_generator(g0, data, h);
        save_checkpoint(g.m, p.gen_ckpt(c));
        std::vector<Example> ex;
        for (const auto& gi : data) ex.push_back(SeqExample{generation_ids(*vocab, gi)});
        gens[label_short(c)] = {{"final_train_loss", forward_loss(g.m, ex)},
                                {"n_instances", data.size()}};
        std::printf("gen %s: final train loss %.4f\n", label_short(c),
                    gens[label_short(c)]["final_train_loss"].get<double>());
    }
    metrics["generators"] = std::move(gens);

    write_text(p.train_metrics(), metrics.dump(2) + "\n");
    std::printf("wrote %s\n", p.train_metrics().c_str());
}

void cmd_attack(const RunConfig& cfg, const std::vector<AttackDirection>& directions,
                ObjectiveMode mode) {
    validate(cfg);
    const RunPaths p{cfg.out_dir};
    const FactCheckModel fc = load_fc(p);
    require_file(p.sts_ckpt(), "run `train` first");
    require_file(p.lm_ckpt(), "run `train` first");
    require_file(p.corpus_train(), "run `train` first");
    require_file(p.corpus_dev(), "run `train` first");
    const StsModel sts{load_checkpoint(p.sts_ckpt())};
    const ConditionalLm lm{load_checkpoint(p.lm_ckpt())};
    const Dataset train = load_jsonl(p.corpus_train());
    const Dataset dev = load_jsonl(p.corpus_dev());

    TriggerSearchConfig tsc = cfg.attack;
    tsc.candidate_exclusions = default_exclusions(*fc.m.vocab);

    const AttackModels models{&fc, &sts};
    std::vector<RankedTriggers> found;
    for (const AttackDirection d : resolve_directions(directions)) {
        RankedTriggers rt = search_triggers(d, mode, models, train, tsc, cfg.seed);
        save_triggers(rt, p.triggers(mode, d));
        std::printf("%s %s: %zu triggers", to_string(mode), d.name().c_str(), rt.entries.size());
        if (!rt.entries.empty())
            std::printf(", best %s (+%.4f)", rt.entries.front().token.c_str(),
                        rt.entries.front().improvement);
        std::printf("\n");
        if (!rt.entries.empty()) found.push_back(std::move(rt));
    }

    const AttackReport report = attack_report(fc, sts, lm, found, dev);
    const std::string text = render_attack_report(report);
    write_text(p.attack_report_txt(mode), text);
    write_text(p.attack_report_json(mode), attack_report_json(report));
    std::fputs(text.c_str(), stdout);
}

void cmd_generate(const RunConfig& cfg, const std::vector<AttackDirection>& directions,
                  ObjectiveMode mode) {
    validate(cfg);
    const RunPaths p{cfg.out_dir};
    const FactCheckModel fc = load_fc(p);
    require_file(p.nli_ckpt(), "run `train` first");
    require_file(p.corpus_dev(), "run `train` first");
    const NliModel nli{load_checkpoint(p.nli_ckpt())};
    const Dataset dev = load_jsonl(p.corpus_dev());

    std::vector<GeneratedClaim> all, kept;
    for (const AttackDirection d : resolve_directions(directions)) {
        const std::string tf = p.triggers(mode, d);
        require_file(tf, "run `attack` first");
        const RankedTriggers rt = load_triggers(tf);
        if (rt.entries.empty())
            throw ValidationError("no triggers in " + tf + "; 5 condition tokens are required");
        std::vector<std::string> top5;
        for (int i = 0; i < 5; ++i) top5.push_back(rt.entries[i % rt.entries.size()].token);

        require_file(p.gen_ckpt(d.source), "run `train` first");
        const ConditionalLm gen{load_checkpoint(p.gen_ckpt(d.source))};

        auto slice = instances_with_label(dev, d.source);
        if (slice.empty())
            throw ValidationError(std::string("no dev instances of class ") +
                                  label_short(d.source));
        if (static_cast<int>(slice.size()) > cfg.evidence_per_direction)
            slice.resize(cfg.evidence_per_direction);

        int n_kept = 0;
        for (const auto& inst : slice) {
            SamplingParams sp = cfg.sampling;
            sp.seed = derive_seed(cfg.seed, std::string("generate.") + to_string(mode) + "." +
                                                d.name() + "." + inst.id);
            auto claims = generate_claims(gen, top5, inst.evidence, inst.id, sp);
            for (auto& c : claims) c.id = d.name() + "#" + c.id;
            auto good = prune_claims(claims, top5, inst.evidence, d.source, nli);
            n_kept += static_cast<int>(good.size());
            all.insert(all.end(), claims.begin(), claims.end());
            kept.insert(kept.end(), good.begin(), good.end());
        }
        std::printf("%s %s: %d/%d claims kept\n", to_string(mode), d.name().c_str(), n_kept,
                    static_cast<int>(slice.size()) * cfg.sampling.num_samples);
    }

    write_generated_claims(all, p.claims(mode));

    std::vector<QualityAnnotation> ann;
    const bool has_ann = !cfg.annotations_path.empty();
    if (has_ann) ann = load_annotations(cfg.annotations_path);
    const auto rows = generation_report(fc, kept, dev, has_ann ? &ann : nullptr);
    const std::string text = render_generation_report(rows);
    write_text(p.generation_report_txt(mode), text);
    write_text(p.generation_report_json(mode), generation_report_json(rows));
    std::fputs(text.c_str(), stdout);
}

void cmd_evaluate(const RunConfig& cfg, const std::vector<AttackDirection>& directions,
                  ObjectiveMode mode) {
    validate(cfg);
    const RunPaths p{cfg.out_dir};
    const FactCheckModel fc = load_fc(p);
    require_file(p.sts_ckpt(), "run `train` first");
    require_file(p.lm_ckpt(), "run `train` first");
    require_file(p.corpus_dev(), "run `train` first");
    const StsModel sts{load_checkpoint(p.sts_ckpt())};
    const ConditionalLm lm{load_checkpoint(p.lm_ckpt())};
    const Dataset dev = load_jsonl(p.corpus_dev());

    std::vector<RankedTriggers> found;
    for (const AttackDirection d : resolve_directions(directions)) {
        const std::string tf = p.triggers(mode, d);
        if (!fs::exists(tf)) continue;
        RankedTriggers rt = load_triggers(tf);
        if (!rt.entries.empty()) found.push_back(std::move(rt));
    }
    const AttackReport report = attack_report(fc, sts, lm, found, dev);
    const std::string text = render_attack_report(report);
    write_text(p.attack_report_txt(mode), text);
    write_text(p.attack_report_json(mode), attack_report_json(report));
    std::fputs(text.c_str(), stdout);

    if (fs::exists(p.claims(mode))) {
        const auto claims = read_generated_claims(p.claims(mode));
        std::vector<GeneratedClaim> kept;
        for (const auto& c : claims)
            if (c.kept) kept.push_back(c);
        std::vector<QualityAnnotation> ann;
        const bool has_ann = !cfg.annotations_path.empty();
        if (has_ann) ann = load_annotations(cfg.annotations_path);
        const auto rows = generation_report(fc, kept, dev, has_ann ? &ann : nullptr);
        const std::string gtext = render_generation_report(rows);
        write_text(p.generation_report_txt(mode), gtext);
        write_text(p.generation_report_json(mode), generation_report_json(rows));
        std::fputs(gtext.c_str(), stdout);
    }
}

void cmd_oracle_check(const RunConfig& cfg) {
    validate(cfg);
    const RunPaths p{cfg.out_dir};
    const FactCheckModel fc = load_fc(p);
    require_file(p.corpus_train(), "run `train` first");
    const Dataset train = load_jsonl(p.corpus_train());
    const auto vocab = fc.m.vocab;
    if (vocab->size() > cfg.oracle_enumeration_cap)
        throw ConfigError("vocabulary size " + std::to_string(vocab->size()) +
                          " exceeds the enumeration cap " +
                          std::to_string(cfg.oracle_enumeration_cap));

    const std::set<int> excl = default_exclusions(*vocab);
    constexpr int kTop = 10;

    auto taylor_top = [&](const EncoderModel& m, const std::vector<ClaimInstance>& slice,
                          AttackDirection d, int start_token, int k) {
        TriggerState st{start_token, d, 0, ObjectiveMode::FC};
        const FactCheckModel shim{m};
        const auto grad =
            accumulate_gradients(shim, slice, st, cfg.attack.batch_size).average();
        const auto scores = taylor_scores(grad, m.E.row(start_token).transpose(), m.E);
        std::vector<int> ids;
        for (int i = 0; i < static_cast<int>(scores.size()); ++i)
            if (i != start_token && !excl.count(i)) ids.push_back(i);
        std::stable_sort(ids.begin(), ids.end(), [&](int a, int b) {
            if (scores[a] != scores[b]) return scores[a] < scores[b];
            return a < b;
        });
        if (static_cast<int>(ids.size()) > k) ids.resize(k);
        return ids;
    };

    json per_direction = json::object();
    int hits = 0, total = 0;
    for (const AttackDirection d : all_directions()) {
        const auto pool = instances_with_label(train, d.source);
        if (pool.empty())
            throw ValidationError(std::string("no instances of class ") + label_short(d.source));
        int dir_hits = 0;
        for (int run = 0; run < cfg.oracle_runs; ++run) {
            Rng rng(derive_seed(cfg.seed, "oracle." + d.name() + ".run" + std::to_string(run)));
            std::vector<int> order(pool.size());
            std::iota(order.begin(), order.end(), 0);
            rng.shuffle(order);
            std::vector<ClaimInstance> slice;
            const int n = std::min<int>(cfg.oracle_slice_size, static_cast<int>(pool.size()));
            for (int i = 0; i < n; ++i) slice.push_back(pool[order[i]]);

            const auto brute = brute_force_ranking(fc, slice, d, 0);
            int brute_top1 = -1;
            for (const auto& [id, loss] : brute)
                if (id != vocab->a_id && !excl.count(id)) {
                    brute_top1 = id;
                    break;
                }
            const auto top = taylor_top(fc.m, slice, d, vocab->a_id, kTop);
            const bool hit = std::find(top.begin(), top.end(), brute_top1) != top.end();
            dir_hits += hit;
        }
        hits += dir_hits;
        total += cfg.oracle_runs;
        per_direction[d.name()] = double(dir_hits) / double(cfg.oracle_runs);
        std::printf("oracle %s: %d/%d\n", d.name().c_str(), dir_hits, cfg.oracle_runs);
    }
    const double trained_rate = double(hits) / double(total);

    // Exactness on a model whose loss is affine in the slot embedding: the
    // Taylor ranking must reproduce the brute-force ranking identically.
    EncoderModel lin = make_model(vocab, OwnerTag::FC, TaskKind::linear_logit, Activation::identity,
                                  8, 8, 3, 48, derive_seed(cfg.seed, "oracle.linear"));
    const AttackDirection d0 = make_direction(Label::SUPPORTS, Label::REFUTES);
    auto lin_slice = instances_with_label(train, d0.source);
    if (static_cast<int>(lin_slice.size()) > 8) lin_slice.resize(8);
    const auto lin_brute = brute_force_ranking(FactCheckModel{lin}, lin_slice, d0, 0);
    TriggerState st{vocab->a_id, d0, 0, ObjectiveMode::FC};
    const auto lin_grad =
        accumulate_gradients(FactCheckModel{lin}, lin_slice, st, cfg.attack.batch_size).average();
    const auto lin_scores = taylor_scores(lin_grad, lin.E.row(vocab->a_id).transpose(), lin.E);
    std::vector<int> lin_rank(vocab->size());
    std::iota(lin_rank.begin(), lin_rank.end(), 0);
    std::stable_sort(lin_rank.begin(), lin_rank.end(), [&](int a, int b) {
        if (lin_scores[a] != lin_scores[b]) return lin_scores[a] < lin_scores[b];
        return a < b;
    });
    bool lin_exact = true;
    for (std::size_t i = 0; i < lin_rank.size(); ++i)
        if (lin_rank[i] != lin_brute[i].first) {
            lin_exact = false;
            break;
        }

    json rep;
    rep["enumeration_cap"] = cfg.oracle_enumeration_cap;
    rep["runs_per_direction"] = cfg.oracle_runs;
    rep["slice_size"] = cfg.oracle_slice_size;
    rep["taylor_top_k"] = kTop;
    rep["per_direction_agreement"] = std::move(per_direction);
    rep["trained_agreement"] = trained_rate;
    rep["linear_ordering_exact"] = lin_exact;
    rep["linear_agreement"] = lin_exact ? 1.0 : 0.0;
    rep["threshold_note"] =
        "0.80 top-1-in-top-10 agreement per direction is the documented design threshold";
    ensure_dir(cfg.out_dir);
    write_text(p.oracle_report(), rep.dump(2) + "\n");
    std::printf("trained agreement %.3f, linear exact %s\n", trained_rate,
                lin_exact ? "yes" : "no");
}

} // namespace uat
