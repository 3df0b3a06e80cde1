#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "fd_check.hpp"
#include "madst/encoder.hpp"

using namespace madst;
using testing::rand_tensor;

namespace {

struct Fixture {
    static constexpr std::size_t hidden = 5;
    EmbedConfig config;
    EmbeddingTables tables;
    HashProvider provider{2, 6, 99};
    EncoderParams params;

    Fixture() : config(small_config()), tables(make_tables(config)), params(make_params()) {}

    static EmbedConfig small_config() {
        EmbedConfig c;
        c.static_dim = 8;
        c.char_emb_dim = 4;
        c.char_out_dim = 6;
        c.tag_dim = 2;
        c.ctx_dim = 6;
        c.ctx_layers = 2;
        c.max_turns = 8;
        return c;
    }
    EmbeddingTables make_tables(const EmbedConfig& c) {
        std::mt19937_64 rng(7);
        return make_embedding_tables(c, {"<unk>", "i", "want", "cheap", "food", "hotel", "name"},
                                     0, rng);
    }
    EncoderParams make_params() {
        std::mt19937_64 rng(8);
        return make_encoder_params(tables.embed_dim(), hidden, 4, rng);
    }
};

std::vector<Token> conv_tokens() {
    return {{"i", 1, -1, 0}, {"want", 2, -1, 0}, {"cheap", 3, 1, 0}, {"food", 1, 2, 1}};
}

std::vector<Token> minimal_tokens() { return {{"food", -1, -1, 0}}; }

void collect_gru(std::vector<Var>& out, const GruParams& g) {
    for (const GruDirection* d : {&g.fwd, &g.bwd}) {
        if (!d->w_update) continue;
        out.insert(out.end(), {d->w_update, d->u_update, d->b_update, d->w_reset, d->u_reset,
                               d->b_reset, d->w_cand, d->u_cand, d->b_cand});
    }
}

std::vector<Var> all_encoder_params(const EncoderParams& p) {
    std::vector<Var> out;
    for (const SymAttnParams* a :
         {&p.word_attn, &p.slot_to_conv, &p.conv_to_slot, &p.self_attn}) {
        out.push_back(a->proj);
        out.push_back(a->diag);
    }
    for (const GruParams* g : {&p.conv_gru1, &p.slot_gru1, &p.conv_gru2, &p.slot_gru2, &p.conv_gru3})
        collect_gru(out, *g);
    out.push_back(p.summarizer_w);
    return out;
}

}  // namespace

TEST_CASE("summarize_slot: single row passes through") {
    std::mt19937_64 rng(1);
    Var h = constant(rand_tensor(1, 4, rng));
    Var w = constant(rand_tensor(1, 4, rng));
    Var s = summarize_slot(h, w);
    for (std::size_t j = 0; j < 4; ++j) CHECK(s->value(0, j) == doctest::Approx(h->value(0, j)));
}

TEST_CASE("summarize_slot: zero weight vector means mean pooling") {
    std::mt19937_64 rng(2);
    Var h = constant(rand_tensor(3, 4, rng));
    Var w = constant(Tensor::zeros(1, 4));
    Var s = summarize_slot(h, w);
    for (std::size_t j = 0; j < 4; ++j) {
        double mean = (h->value(0, j) + h->value(1, j) + h->value(2, j)) / 3.0;
        CHECK(s->value(0, j) == doctest::Approx(mean));
    }
}

TEST_CASE("summarize_slot: scores (0, ln 3) mix rows 1:3") {
    // h rows chosen so w.h_0 = 0 and w.h_1 = ln 3 -> alpha = (0.25, 0.75)
    Var h = constant(Tensor(2, 2, {0.0, 10.0, std::log(3.0), -2.0}));
    Var w = constant(Tensor(1, 2, {1.0, 0.0}));
    Var s = summarize_slot(h, w);
    CHECK(s->value(0, 0) == doctest::Approx(0.75 * std::log(3.0)));
    CHECK(s->value(0, 1) == doctest::Approx(0.25 * 10.0 + 0.75 * -2.0));
}

TEST_CASE("encode handles the degenerate one-token, one-slot-token case") {
    Fixture f;
    FeatureRun run;
    EncoderOutput out =
        encode(minimal_tokens(), {{"hotel"}}, f.tables, f.provider, f.params, {}, 0.0, run);
    CHECK(out.history_repr->value.rows() == 1);
    CHECK(out.history_repr->value.cols() == f.hidden);
    CHECK(out.slot_summary->value.rows() == 1);
    CHECK(out.slot_summary->value.cols() == f.hidden);
    CHECK(out.history_repr->value.all_finite());
    CHECK(out.slot_summary->value.all_finite());
}

TEST_CASE("history_final equals the last row of history_repr") {
    Fixture f;
    FeatureRun run;
    EncoderOutput out =
        encode(conv_tokens(), slot_tokens("hotel-name"), f.tables, f.provider, f.params, {}, 0.0, run);
    std::size_t last = out.history_repr->value.rows() - 1;
    CHECK(out.history_repr->value.rows() == 4);
    for (std::size_t j = 0; j < f.hidden; ++j)
        CHECK(out.history_final->value(0, j) == out.history_repr->value(last, j));
}

TEST_CASE("encoding is sensitive to a token swap") {
    Fixture f;
    FeatureRun run;
    auto a = conv_tokens();
    auto b = a;
    std::swap(b[0].surface, b[2].surface);
    auto slot = slot_tokens("hotel-name");
    Tensor ha = encode(a, slot, f.tables, f.provider, f.params, {}, 0.0, run).history_final->value;
    Tensor hb = encode(b, slot, f.tables, f.provider, f.params, {}, 0.0, run).history_final->value;
    double diff = 0.0;
    for (std::size_t j = 0; j < f.hidden; ++j) diff += std::abs(ha(0, j) - hb(0, j));
    CHECK(diff > 1e-8);
}

TEST_CASE("eval-mode encoding is bit-identical across calls") {
    Fixture f;
    FeatureRun run;  // training=false, rng unused
    auto slot = slot_tokens("hotel-book stay");
    EncoderOutput a = encode(conv_tokens(), slot, f.tables, f.provider, f.params, {}, 0.5, run);
    EncoderOutput b = encode(conv_tokens(), slot, f.tables, f.provider, f.params, {}, 0.5, run);
    for (std::size_t i = 0; i < a.history_repr->value.rows(); ++i)
        for (std::size_t j = 0; j < f.hidden; ++j)
            CHECK(a.history_repr->value(i, j) == b.history_repr->value(i, j));
    for (std::size_t j = 0; j < f.hidden; ++j)
        CHECK(a.slot_summary->value(0, j) == b.slot_summary->value(0, j));
}

TEST_CASE("disabled stages still produce well-formed output") {
    Fixture f;
    FeatureRun run;
    EncoderStages stages;
    stages.word_xattn = false;
    stages.high_xattn = false;
    stages.self_attn = false;
    stages.slot_summarizer = false;
    EncoderOutput out =
        encode(conv_tokens(), slot_tokens("hotel-name"), f.tables, f.provider, f.params, stages, 0.0, run);
    CHECK(out.history_repr->value.rows() == 4);
    CHECK(out.history_repr->value.cols() == f.hidden);
    CHECK(out.slot_summary->value.cols() == f.hidden);
    CHECK(out.history_repr->value.all_finite());
}

TEST_CASE("every encoder parameter group receives gradient") {
    Fixture f;
    FeatureRun run;
    EncoderOutput out =
        encode(conv_tokens(), slot_tokens("hotel-name"), f.tables, f.provider, f.params, {}, 0.0, run);
    Var loss = add(sum_all(out.history_repr), add(sum_all(out.slot_summary), sum_all(out.history_final)));
    backward(loss);
    for (const Var& p : all_encoder_params(f.params)) {
        double total = 0.0;
        for (std::size_t k = 0; k < p->grad.size(); ++k) total += std::abs(p->grad.at(k));
        INFO(p->name);
        CHECK(total > 0.0);
    }
}

TEST_CASE("encoder gradients match finite differences on a tiny model") {
    EmbedConfig c;
    c.static_dim = 3;
    c.char_emb_dim = 2;
    c.char_out_dim = 2;
    c.tag_dim = 1;
    c.ctx_dim = 2;
    c.ctx_layers = 2;
    c.max_turns = 4;
    std::mt19937_64 rng(11);
    EmbeddingTables tables = make_embedding_tables(c, {"<unk>", "a", "b"}, 0, rng);
    EncoderParams params = make_encoder_params(tables.embed_dim(), 3, 2, rng);
    HashProvider provider(2, 2, 5);
    FeatureRun run;
    std::vector<Token> conv = {{"a", -1, -1, 0}, {"b", -1, -1, 0}};
    auto build = [&] {
        EncoderOutput out = encode(conv, {{"a"}}, tables, provider, params, {}, 0.0, run);
        return add(sum_all(out.history_repr), sum_all(out.slot_summary));
    };
    std::vector<Var> probe = {params.summarizer_w, params.word_attn.proj, params.word_attn.diag,
                              params.conv_gru1.fwd.w_update, params.conv_gru3.bwd.b_cand,
                              params.slot_gru2.fwd.u_reset, params.self_attn.proj};
    CHECK(testing::fd_max_rel_err(build, probe) < 1e-4);
}
