#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <memory>

#include <nlohmann/json.hpp>

#include "uat/error.hpp"
#include "uat/evaluation.hpp"
#include "uat/text.hpp"

using namespace uat;

namespace {

std::shared_ptr<const Vocabulary> eval_vocab() {
    std::vector<std::string> toks;
    for (int i = 0; i < 16; ++i) toks.push_back("w" + std::to_string(i));
    return std::make_shared<Vocabulary>(Vocabulary::build(toks));
}

Dataset eval_dataset(int per_class) {
    Dataset d;
    d.name = "eval";
    const char* heads[3] = {"w0", "w1", "w2"};
    for (int c = 0; c < 3; ++c)
        for (int i = 0; i < per_class; ++i) {
            ClaimInstance inst;
            inst.id = std::string("e") + std::to_string(c) + "-" + std::to_string(i);
            inst.claim = std::string(heads[c]) + " w" + std::to_string(3 + i % 6);
            inst.evidence = "w" + std::to_string(3 + i % 4) + " w9";
            inst.label = static_cast<Label>(c);
            d.instances.push_back(inst);
        }
    return d;
}

struct EvalModels {
    FactCheckModel fc;
    StsModel sts;
    ConditionalLm lm;
};

EvalModels eval_models(std::shared_ptr<const Vocabulary> v) {
    return {
        FactCheckModel{make_model(v, OwnerTag::FC, TaskKind::classifier, Activation::tanh_act, 6,
                                  5, 3, 48, 40)},
        StsModel{make_model(v, OwnerTag::STS, TaskKind::pair_score, Activation::tanh_act, 6, 5, 1,
                            48, 41)},
        ConditionalLm{make_model(v, OwnerTag::LM, TaskKind::next_token, Activation::tanh_act, 6, 5,
                                 v->size(), 48, 42)},
    };
}

} // namespace

TEST_CASE("confusion and f1 by hand") {
    const std::vector<Label> golds = {Label::SUPPORTS, Label::SUPPORTS, Label::REFUTES,
                                      Label::NEI};
    const std::vector<Label> preds(4, Label::SUPPORTS);
    const ConfusionMatrix cm = confusion(preds, golds);
    CHECK(cm.total() == 4);
    CHECK(cm.counts[0][0] == 2);
    CHECK(cm.counts[1][0] == 1);
    CHECK(cm.counts[2][0] == 1);
    CHECK(class_f1(cm, 0) == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
    CHECK(class_f1(cm, 1) == 0.0);
    CHECK(class_f1(cm, 2) == 0.0);
    CHECK(macro_f1(cm) == doctest::Approx(2.0 / 9.0).epsilon(1e-15));
    CHECK(macro_f1(preds, golds) == macro_f1(cm));

    // perfect and cyclically wrong predictors bracket the range
    std::vector<Label> all = {Label::SUPPORTS, Label::REFUTES, Label::NEI};
    CHECK(macro_f1(all, all) == 1.0);
    const std::vector<Label> rot = {Label::REFUTES, Label::NEI, Label::SUPPORTS};
    CHECK(macro_f1(rot, all) == 0.0);

    CHECK_THROWS_AS(confusion(preds, {Label::NEI}), ValidationError);
    CHECK_THROWS_AS(confusion({}, {}), ValidationError);
    CHECK_THROWS_AS(class_f1(cm, 3), IndexError);
}

TEST_CASE("mean_std is the population statistic") {
    const MeanStd ms = mean_std({1.0, 3.0});
    CHECK(ms.mean == 2.0);
    CHECK(ms.stddev == 1.0);
    const MeanStd one = mean_std({5.0});
    CHECK(one.mean == 5.0);
    CHECK(one.stddev == 0.0);
    CHECK_THROWS_AS(mean_std({}), ValidationError);
}

TEST_CASE("attack report baseline and aggregation") {
    auto v = eval_vocab();
    const Dataset d = eval_dataset(5);
    const EvalModels m = eval_models(v);

    RankedTriggers sr;
    sr.direction = make_direction(Label::SUPPORTS, Label::REFUTES);
    sr.entries = {{"w10", 0.5}, {"w11", 0.25}};
    RankedTriggers ns;
    ns.direction = make_direction(Label::NEI, Label::SUPPORTS);
    ns.entries = {{"w12", 0.4}};

    const AttackReport rep = attack_report(m.fc, m.sts, m.lm, {sr, ns}, d);
    CHECK(rep.mode == ObjectiveMode::FC);
    CHECK(rep.baseline.label == "baseline");
    CHECK(rep.baseline.sts.mean == 5.0);
    CHECK(rep.baseline.sts.stddev == 0.0);
    CHECK(rep.baseline.f1.mean >= 0.0);
    CHECK(rep.baseline.f1.mean <= 1.0);
    CHECK(rep.baseline.ppl.mean > 0.0);
    CHECK(rep.baseline.n_triggers == 0);

    REQUIRE(rep.directions.size() == 2);
    CHECK(rep.directions[0].label == "S->R");
    CHECK(rep.directions[0].n_triggers == 2);
    CHECK(rep.directions[1].label == "NEI->S");
    CHECK(rep.directions[1].n_triggers == 1);
    for (const auto& row : rep.directions) {
        CHECK(row.sts.mean >= 0.0);
        CHECK(row.sts.mean <= 5.0);
        CHECK(row.ppl.mean > 0.0);
    }
    // a one-trigger direction has zero spread
    CHECK(rep.directions[1].f1.stddev == 0.0);
    CHECK(rep.directions[1].sts.stddev == 0.0);

    REQUIRE(rep.direction_baseline_f1.size() == 2);
    CHECK(rep.direction_baseline_f1[0].first == "S->R");
    CHECK(rep.direction_baseline_f1[0].second >= 0.0);
    CHECK(rep.direction_baseline_f1[0].second <= 1.0);

    REQUIRE(rep.has_all);
    CHECK(rep.all.label == "All");
    CHECK(rep.all.n_triggers == 3);
    // pooled mean of three per-trigger values
    const double pooled =
        (2.0 * rep.directions[0].f1.mean + rep.directions[1].f1.mean) / 3.0;
    CHECK(rep.all.f1.mean == doctest::Approx(pooled).epsilon(1e-12));

    // a single direction pools to itself exactly
    const AttackReport solo = attack_report(m.fc, m.sts, m.lm, {ns}, d);
    CHECK(solo.all.f1.mean == solo.directions[0].f1.mean);
    CHECK(solo.all.f1.stddev == solo.directions[0].f1.stddev);
    CHECK(solo.all.ppl.mean == solo.directions[0].ppl.mean);

    // trigger-free report still carries the baseline
    const AttackReport none = attack_report(m.fc, m.sts, m.lm, {}, d);
    CHECK(none.has_all == false);
    CHECK(none.directions.empty());
    CHECK(none.baseline.sts.mean == 5.0);
}

TEST_CASE("attack report input validation") {
    auto v = eval_vocab();
    const Dataset d = eval_dataset(3);
    const EvalModels m = eval_models(v);

    RankedTriggers empty_entries;
    empty_entries.direction = make_direction(Label::SUPPORTS, Label::NEI);
    CHECK_THROWS_AS(attack_report(m.fc, m.sts, m.lm, {empty_entries}, d), ValidationError);

    RankedTriggers a, b;
    a.direction = make_direction(Label::SUPPORTS, Label::NEI);
    a.mode = ObjectiveMode::FC;
    a.entries = {{"w10", 0.1}};
    b = a;
    b.mode = ObjectiveMode::FC_STS;
    CHECK_THROWS_AS(attack_report(m.fc, m.sts, m.lm, {a, b}, d), ValidationError);

    CHECK_THROWS_AS(attack_report(m.fc, m.sts, m.lm, {a}, Dataset{}), ValidationError);
}

TEST_CASE("attack report rendering and json") {
    auto v = eval_vocab();
    const Dataset d = eval_dataset(4);
    const EvalModels m = eval_models(v);
    RankedTriggers rt;
    rt.direction = make_direction(Label::REFUTES, Label::NEI);
    rt.mode = ObjectiveMode::FC_STS;
    rt.entries = {{"w13", 0.3}};

    const AttackReport rep = attack_report(m.fc, m.sts, m.lm, {rt}, d);
    const std::string text = render_attack_report(rep);
    CHECK(text.find("objective: FC_STS") != std::string::npos);
    CHECK(text.find("baseline") != std::string::npos);
    CHECK(text.find("R->NEI") != std::string::npos);
    CHECK(text.find("All") != std::string::npos);
    CHECK(text.find("±") != std::string::npos);

    const auto j = nlohmann::json::parse(attack_report_json(rep));
    CHECK(j.at("mode") == "FC_STS");
    CHECK(j.at("baseline").at("sts").at("mean") == 5.0);
    CHECK(j.at("directions").size() == 1);
    CHECK(j.at("all").at("n_triggers") == 1);
    CHECK(j.at("direction_baseline_f1").contains("R->NEI"));
    CHECK(j.at("all_row_aggregation").is_string());
}

TEST_CASE("annotation loading enforces the quality range") {
    const std::string path = "/tmp/uat_test_annotations.jsonl";
    {
        std::ofstream out(path);
        out << R"({"claim_id": "e0-0#g0", "quality": 4, "label": "SUPPORTS"})" << "\n";
        out << "\n"; // blank lines are skipped
        out << R"({"claim_id": "e0-0#g1", "quality": 1, "label": "NEI"})" << "\n";
    }
    const auto anns = load_annotations(path);
    REQUIRE(anns.size() == 2);
    CHECK(anns[0].claim_id == "e0-0#g0");
    CHECK(anns[0].quality == 4);
    CHECK(anns[0].label == Label::SUPPORTS);
    CHECK(anns[1].label == Label::NEI);

    {
        std::ofstream out(path);
        out << R"({"claim_id": "x", "quality": 6, "label": "NEI"})" << "\n";
    }
    CHECK_THROWS_AS(load_annotations(path), ValidationError);
    {
        std::ofstream out(path);
        out << R"({"claim_id": "x", "quality": 0, "label": "NEI"})" << "\n";
    }
    CHECK_THROWS_AS(load_annotations(path), ValidationError);
    {
        std::ofstream out(path);
        out << "{bad" << "\n";
    }
    CHECK_THROWS_AS(load_annotations(path), ParseError);
    std::remove(path.c_str());
    CHECK_THROWS_AS(load_annotations(path), IoError);
}

TEST_CASE("generation report rows follow the intended classes") {
    auto v = eval_vocab();
    const Dataset d = eval_dataset(3);
    const EvalModels m = eval_models(v);

    std::vector<GeneratedClaim> kept(3);
    kept[0].id = "e0-0#g0";
    kept[0].text = "w10 w3";
    kept[0].evidence_id = "e0-0";
    kept[0].intended_label = Label::SUPPORTS;
    kept[1].id = "e0-1#g0";
    kept[1].text = "w11 w4";
    kept[1].evidence_id = "e0-1";
    kept[1].intended_label = Label::SUPPORTS;
    kept[2].id = "e1-0#g2";
    kept[2].text = "w12";
    kept[2].evidence_id = "e1-0";
    kept[2].intended_label = Label::REFUTES;

    const auto rows = generation_report(m.fc, kept, d);
    REQUIRE(rows.size() == 4);
    CHECK(rows[0].label == "S");
    CHECK(rows[0].n_examples == 2);
    CHECK(rows[0].f1.has_value());
    CHECK(rows[1].label == "R");
    CHECK(rows[1].n_examples == 1);
    CHECK(rows[2].label == "NEI");
    CHECK(rows[2].n_examples == 0);
    CHECK(!rows[2].f1.has_value());
    CHECK(rows[3].label == "Overall");
    CHECK(rows[3].n_examples == 3);
    REQUIRE(rows[3].f1.has_value());

    // overall equals macro-F1 of the pooled predictions, reproduced here
    std::vector<Label> preds, golds;
    std::map<std::string, ClaimInstance> by_id;
    for (const auto& inst : d.instances) by_id[inst.id] = inst;
    for (const auto& c : kept) {
        preds.push_back(fc_predict(m.fc, c.text, by_id.at(c.evidence_id).evidence).first);
        golds.push_back(c.intended_label);
    }
    CHECK(*rows[3].f1 == macro_f1(preds, golds));
    CHECK(!rows[3].avg_quality.has_value()); // no annotations given

    // quality annotations average per class
    std::vector<QualityAnnotation> anns = {
        {"e0-0#g0", 4, Label::SUPPORTS},
        {"e0-1#g0", 2, Label::SUPPORTS},
        {"e1-0#g2", 5, Label::REFUTES},
    };
    const auto rows2 = generation_report(m.fc, kept, d, &anns);
    REQUIRE(rows2[0].avg_quality.has_value());
    CHECK(*rows2[0].avg_quality == 3.0);
    CHECK(*rows2[1].avg_quality == 5.0);
    CHECK(*rows2[3].avg_quality == doctest::Approx(11.0 / 3.0).epsilon(1e-15));

    std::vector<QualityAnnotation> bad = {{"nope#g9", 3, Label::NEI}};
    CHECK_THROWS_AS(generation_report(m.fc, kept, d, &bad), ValidationError);

    std::vector<GeneratedClaim> orphan = kept;
    orphan[0].evidence_id = "missing-id";
    CHECK_THROWS_AS(generation_report(m.fc, orphan, d), ValidationError);

    // empty kept set still produces the four rows
    const auto empty_rows = generation_report(m.fc, {}, d);
    REQUIRE(empty_rows.size() == 4);
    CHECK(empty_rows[3].n_examples == 0);
    CHECK(!empty_rows[3].f1.has_value());

    const std::string text = render_generation_report(rows2);
    CHECK(text.find("Overall") != std::string::npos);
    const auto j = nlohmann::json::parse(generation_report_json(rows2));
    REQUIRE(j.at("rows").is_array());
    CHECK(j.at("rows").size() == 4);
    CHECK(j.at("rows")[3].at("label") == "Overall");
    CHECK(j.at("rows")[2].at("f1").is_null());
}
