#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <memory>
#include <variant>

#include "uat/corpus.hpp"
#include "uat/error.hpp"
#include "uat/task_models.hpp"

using namespace uat;

namespace {

std::shared_ptr<const Vocabulary> vocab_n(int extra) {
    std::vector<std::string> toks;
    for (int i = 0; i < extra; ++i) toks.push_back("w" + std::to_string(i));
    return std::make_shared<Vocabulary>(Vocabulary::build(toks));
}

Dataset tiny_dataset() {
    Dataset d;
    d.name = "tiny";
    d.instances = {
        {"t1", "w0 w1 w2", "w0 w1 w2", Label::SUPPORTS},
        {"t2", "w3 w4", "w4 w5 w6", Label::REFUTES},
        {"t3", "w7 w8 w9 w0", "w1 w2", Label::NEI},
    };
    return d;
}

} // namespace

TEST_CASE("nli and fc labels share their integer coding") {
    for (int i = 0; i < 3; ++i) {
        CHECK(static_cast<int>(fc_to_nli(static_cast<Label>(i))) == i);
        CHECK(static_cast<int>(nli_to_fc(static_cast<NliLabel>(i))) == i);
    }
    CHECK(std::string(to_string(NliLabel::ENTAILMENT)) == "ENTAILMENT");
    CHECK(std::string(to_string(NliLabel::CONTRADICTION)) == "CONTRADICTION");
    CHECK(std::string(to_string(NliLabel::NEUTRAL)) == "NEUTRAL");
}

TEST_CASE("model factories pin task shapes") {
    auto v = vocab_n(12);
    const FactCheckModel fc = make_fc_model(v, 8, 6, 1);
    CHECK(fc.m.owner == OwnerTag::FC);
    CHECK(fc.m.kind == TaskKind::classifier);
    CHECK(fc.m.out_dim == 3);

    const StsModel sts = make_sts_model(v, 8, 6, 2);
    CHECK(sts.m.owner == OwnerTag::STS);
    CHECK(sts.m.kind == TaskKind::pair_score);

    const NliModel nli = make_nli_model(v, 8, 6, 3);
    CHECK(nli.m.owner == OwnerTag::NLI);
    CHECK(nli.m.kind == TaskKind::classifier);
    CHECK(nli.m.out_dim == 3);

    const ConditionalLm lm = make_lm_model(v, 8, 6, 32, 4);
    CHECK(lm.m.owner == OwnerTag::LM);
    CHECK(lm.m.kind == TaskKind::next_token);
    CHECK(lm.m.out_dim == v->size());
    CHECK(lm.m.context_window == 32);
}

TEST_CASE("pack_pair layout is claim SEP evidence") {
    auto v = vocab_n(12);
    const auto ids = pack_pair(*v, "w0 w1", "w2 w3 w4");
    std::vector<int> want = {v->id_or_unk("w0"), v->id_or_unk("w1"), v->sep_id,
                             v->id_or_unk("w2"), v->id_or_unk("w3"), v->id_or_unk("w4")};
    CHECK(ids == want);
    // unknown words degrade to UNK, never throw
    const auto ids2 = pack_pair(*v, "mystery", "w0");
    CHECK(ids2[0] == v->unk_id);
}

TEST_CASE("fc_predict returns a distribution consistent with its argmax") {
    auto v = vocab_n(12);
    const FactCheckModel fc = make_fc_model(v, 8, 6, 11);
    const auto [label, probs] = fc_predict(fc, "w0 w1 w2", "w3 w4");
    double sum = 0.0;
    int arg = 0;
    for (int i = 0; i < 3; ++i) {
        CHECK(probs[i] > 0.0);
        sum += probs[i];
        if (probs[i] > probs[arg]) arg = i;
    }
    CHECK(std::abs(sum - 1.0) < 1e-12);
    CHECK(static_cast<int>(label) == arg);
}

TEST_CASE("sts_score is exactly 5 on identical texts and symmetric") {
    auto v = vocab_n(30);
    const StsModel sts = make_sts_model(v, 8, 6, 5);
    Rng rng(808);
    for (int trial = 0; trial < 25; ++trial) {
        std::string text;
        const int len = 1 + static_cast<int>(rng.index(6));
        for (int i = 0; i < len; ++i) {
            if (i) text += ' ';
            text += "w" + std::to_string(rng.index(30));
        }
        CHECK(sts_score(sts, text, text) == 5.0);
        CHECK(sts_loss(sts, text, text) == 0.0);
    }
    const double ab = sts_score(sts, "w0 w1", "w2 w3 w4");
    const double ba = sts_score(sts, "w2 w3 w4", "w0 w1");
    CHECK(ab == ba);
    CHECK(ab >= 0.0);
    CHECK(ab <= 5.0);
    CHECK_THROWS_AS(sts_score(sts, "", "w0"), ValidationError);
}

TEST_CASE("a zeroed head makes perplexity exactly the vocabulary size") {
    auto v = vocab_n(136); // 7 specials + 136 words + "a" = 144
    REQUIRE(v->size() == 144);
    ConditionalLm lm = make_lm_model(v, 8, 6, 32, 17);
    lm.m.W2.setZero();
    lm.m.b2.setZero();
    CHECK(lm_perplexity(lm, "w0 w1 w2 w3") == 144.0);
    CHECK(lm_perplexity(lm, "w9") == 144.0);
    CHECK_THROWS_AS(lm_perplexity(lm, ""), ValidationError);
}

TEST_CASE("lm sampling is seeded and never emits structural ids") {
    auto v = vocab_n(20);
    const ConditionalLm lm = make_lm_model(v, 8, 6, 32, 23);
    const std::vector<int> prefix = {v->id_or_unk("w0"), v->comma_id, v->id_or_unk("w1"),
                                     v->pipes_id};
    SamplingParams p;
    p.seed = 99;
    p.max_length = 8;
    const auto s1 = lm_generate(lm, prefix, p);
    const auto s2 = lm_generate(lm, prefix, p);
    CHECK(s1 == s2);
    CHECK(s1.size() <= 8);
    for (int id : s1) CHECK(id >= Vocabulary::n_special);

    p.seed = 100;
    bool any_diff = false;
    for (int k = 0; k < 5 && !any_diff; ++k, ++p.seed)
        any_diff = lm_generate(lm, prefix, p) != s1;
    CHECK(any_diff);

    SamplingParams bad = p;
    bad.temperature = 0.0;
    CHECK_THROWS_AS(lm_generate(lm, prefix, bad), ConfigError);

    Rng stream(7);
    std::vector<int> huge(40, v->id_or_unk("w0"));
    CHECK_THROWS_AS(lm_generate_stream(lm, huge, 4, 1.0, stream), GenerationError);
}

TEST_CASE("example builders mirror the dataset") {
    auto v = vocab_n(12);
    const Dataset d = tiny_dataset();

    const auto fc = fc_examples(*v, d);
    REQUIRE(fc.size() == d.instances.size());
    for (std::size_t i = 0; i < fc.size(); ++i) {
        const auto& ce = std::get<ClsExample>(fc[i]);
        CHECK(ce.ids == pack_pair(*v, d.instances[i].claim, d.instances[i].evidence));
        CHECK(ce.target == static_cast<int>(d.instances[i].label));
    }

    const auto nli = nli_examples(*v, d);
    REQUIRE(nli.size() == d.instances.size());
    for (std::size_t i = 0; i < nli.size(); ++i)
        CHECK(std::get<ClsExample>(nli[i]).target == static_cast<int>(d.instances[i].label));

    const auto lmx = lm_claim_examples(*v, d);
    REQUIRE(lmx.size() == d.instances.size());
    const auto& seq = std::get<SeqExample>(lmx[0]);
    auto want = v->encode(d.instances[0].claim);
    want.push_back(v->eos_id);
    CHECK(seq.ids == want);
}

TEST_CASE("sts examples carry bounded targets and exact self pairs") {
    auto v = vocab_n(12);
    const Dataset d = tiny_dataset();
    const auto ex = sts_examples(*v, d, 31);
    REQUIRE(ex.size() == 3 * d.instances.size());
    int fives = 0;
    for (const auto& e : ex) {
        const auto& pe = std::get<PairExample>(e);
        CHECK(pe.target >= 0.0);
        CHECK(pe.target <= 5.0);
        CHECK(!pe.a.empty());
        CHECK(!pe.b.empty());
        if (pe.a == pe.b && pe.target == 5.0) ++fives;
    }
    CHECK(fives >= static_cast<int>(d.instances.size()));
    // every instance's first pair is its exact self pair
    for (std::size_t i = 0; i < d.instances.size(); ++i) {
        const auto& self = std::get<PairExample>(ex[3 * i]);
        CHECK(self.a == v->encode(d.instances[i].claim));
        CHECK(self.a == self.b);
        CHECK(self.target == 5.0);
    }

    const auto again = sts_examples(*v, d, 31);
    REQUIRE(again.size() == ex.size());
    for (std::size_t i = 0; i < ex.size(); ++i) {
        const auto& p = std::get<PairExample>(ex[i]);
        const auto& q = std::get<PairExample>(again[i]);
        CHECK(p.a == q.a);
        CHECK(p.b == q.b);
        CHECK(p.target == q.target);
    }
}
