#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "fd_check.hpp"
#include "madst/features.hpp"

using namespace madst;
using testing::fd_max_rel_err;

namespace {

EmbedConfig small_config() {
    EmbedConfig c;
    c.static_dim = 6;
    c.char_emb_dim = 4;
    c.char_out_dim = 5;
    c.tag_dim = 2;
    c.ctx_dim = 3;
    c.ctx_layers = 2;
    c.max_turns = 4;
    c.pos_vocab = 4;
    c.ner_vocab = 4;
    return c;
}

EmbeddingTables small_tables(const EmbedConfig& c, std::uint64_t seed = 3) {
    std::mt19937_64 rng(seed);
    return make_embedding_tables(c, {"<unk>", "hotel", "name", "taxi", "train", "leaveat"}, 0,
                                 rng);
}

// provider whose layers are all the same constant value
class ConstProvider : public ContextualProvider {
public:
    ConstProvider(std::size_t layers, std::size_t dim, double v)
        : layers_(layers), dim_(dim), v_(v) {}
    std::size_t num_layers() const override { return layers_; }
    std::size_t dim() const override { return dim_; }
    std::vector<Tensor> embed(const std::vector<std::string>& surfaces) const override {
        std::vector<Tensor> out;
        for (std::size_t l = 0; l < layers_; ++l) {
            Tensor t(surfaces.size(), dim_);
            t.fill(v_);
            out.push_back(std::move(t));
        }
        return out;
    }

private:
    std::size_t layers_, dim_;
    double v_;
};

void zero_all(EmbeddingTables& t) {
    for (Var v : {t.static_table, t.char_table, t.pos_table, t.ner_table, t.turn_table,
                  t.mix_logits, t.mix_scale, t.char_gru.fwd.w_update, t.char_gru.fwd.u_update,
                  t.char_gru.fwd.w_reset, t.char_gru.fwd.u_reset, t.char_gru.fwd.w_cand,
                  t.char_gru.fwd.u_cand})
        v->value.fill(0.0);
}

}  // namespace

TEST_CASE("embedding width is static+char+ctx+3*tag for every token") {
    EmbedConfig c = small_config();
    EmbeddingTables tables = small_tables(c);
    HashProvider provider(c.ctx_layers, c.ctx_dim, 9);
    FeatureRun run;
    std::vector<Token> toks = {{"hotel", 0, 1, 0}, {"zzz-oov", -1, -1, 1}};
    Var e = embed_conversation(toks, tables, provider, run);
    CHECK(e->value.rows() == 2);
    CHECK(e->value.cols() == c.static_dim + c.char_out_dim + c.ctx_dim + 3 * c.tag_dim);
    CHECK(e->value.cols() == tables.embed_dim());
}

TEST_CASE("default dims give the 415 + d_ctx layout") {
    EmbedConfig c;
    CHECK(c.static_dim + c.char_out_dim + 3 * c.tag_dim == 415);
    EmbeddingTables t;
    t.config = c;
    CHECK(t.embed_dim() == 415 + c.ctx_dim);
}

TEST_CASE("zero tables and zero provider give the zero vector") {
    EmbedConfig c = small_config();
    EmbeddingTables tables = small_tables(c);
    zero_all(tables);
    ConstProvider provider(c.ctx_layers, c.ctx_dim, 0.0);
    FeatureRun run;
    Var e = embed_conversation({{"hotel", 0, 0, 0}}, tables, provider, run);
    for (std::size_t k = 0; k < e->value.size(); ++k) CHECK(e->value.at(k) == 0.0);
}

TEST_CASE("identical tokens in the same turn embed identically") {
    EmbedConfig c = small_config();
    EmbeddingTables tables = small_tables(c);
    ConstProvider provider(c.ctx_layers, c.ctx_dim, 0.4);
    FeatureRun run;
    std::vector<Token> toks = {{"name", 1, 1, 2}, {"name", 1, 1, 2}};
    Var e = embed_conversation(toks, tables, provider, run);
    for (std::size_t j = 0; j < e->value.cols(); ++j)
        CHECK(e->value(0, j) == doctest::Approx(e->value(1, j)));
}

TEST_CASE("unknown surface maps to the UNK static row, never an error") {
    EmbedConfig c = small_config();
    EmbeddingTables tables = small_tables(c);
    CHECK(tables.lookup_word("never-seen-word") == tables.unk_id);
}

TEST_CASE("scalar mix with equal logits averages the layers") {
    // layers L1 = [1, 0, ...], L2 = [0, 1, ...] -> mix = scale * [0.5, 0.5, ...]
    EmbedConfig c = small_config();
    EmbeddingTables tables = small_tables(c);
    zero_all(tables);
    tables.mix_scale->value.at(0) = 2.0;

    class TwoLayer : public ContextualProvider {
    public:
        explicit TwoLayer(std::size_t dim) : dim_(dim) {}
        std::size_t num_layers() const override { return 2; }
        std::size_t dim() const override { return dim_; }
        std::vector<Tensor> embed(const std::vector<std::string>& s) const override {
            Tensor l1(s.size(), dim_), l2(s.size(), dim_);
            for (std::size_t i = 0; i < s.size(); ++i) {
                l1(i, 0) = 1.0;
                l2(i, 1) = 1.0;
            }
            return {l1, l2};
        }

    private:
        std::size_t dim_;
    } provider(c.ctx_dim);

    FeatureRun run;
    Var e = embed_conversation({{"hotel", 0, 0, 0}}, tables, provider, run);
    std::size_t ctx_off = c.static_dim + c.char_out_dim;
    CHECK(e->value.at(ctx_off + 0) == doctest::Approx(2.0 * 0.5));
    CHECK(e->value.at(ctx_off + 1) == doctest::Approx(2.0 * 0.5));
    CHECK(e->value.at(ctx_off + 2) == doctest::Approx(0.0));
}

TEST_CASE("gradient reaches scalar-mix logits but the provider stays frozen") {
    EmbedConfig c = small_config();
    EmbeddingTables tables = small_tables(c);
    ConstProvider provider(c.ctx_layers, c.ctx_dim, 0.7);
    FeatureRun run;
    std::vector<Token> toks = {{"hotel", 0, 0, 0}};
    std::vector<Var> mix_params = {tables.mix_logits, tables.mix_scale};
    // layers differ per logit only through the softmax; perturb to break ties
    tables.mix_logits->value.at(0) = 0.3;
    double err = fd_max_rel_err(
        [&] { return sum_all(mul(embed_conversation(toks, tables, provider, run),
                                 embed_conversation(toks, tables, provider, run))); },
        mix_params);
    CHECK(err < 1e-4);
}

TEST_CASE("finetune flag off freezes static vectors") {
    EmbedConfig c = small_config();
    c.finetune_static = false;
    EmbeddingTables tables = small_tables(c);
    HashProvider provider(c.ctx_layers, c.ctx_dim, 9);
    FeatureRun run;
    Var e = embed_conversation({{"hotel", 0, 0, 0}}, tables, provider, run);
    backward(sum_all(e));
    for (std::size_t k = 0; k < tables.static_table->grad.size(); ++k)
        CHECK(tables.static_table->grad.at(k) == 0.0);
    // other tables still learn
    bool any = false;
    for (std::size_t k = 0; k < tables.pos_table->grad.size(); ++k)
        any = any || tables.pos_table->grad.at(k) != 0.0;
    CHECK(any);
}

TEST_CASE("char_compose basics") {
    EmbedConfig c = small_config();
    EmbeddingTables tables = small_tables(c);

    CHECK_THROWS_AS(char_compose("", tables), std::invalid_argument);

    Var single = char_compose("a", tables);
    CHECK(single->value.cols() == c.char_out_dim);

    // anagrams differ under the position-sensitive recurrent composer
    Tensor act = char_compose("act", tables)->value;
    Tensor cat = char_compose("cat", tables)->value;
    bool differ = false;
    for (std::size_t k = 0; k < act.size(); ++k) differ = differ || act.at(k) != cat.at(k);
    CHECK(differ);

    zero_all(tables);
    Tensor z = char_compose("word", tables)->value;
    for (std::size_t k = 0; k < z.size(); ++k) CHECK(z.at(k) == 0.0);
}

TEST_CASE("char composer gradients match finite differences") {
    EmbedConfig c = small_config();
    EmbeddingTables tables = small_tables(c);
    std::vector<Var> params = {tables.char_table, tables.char_gru.fwd.w_update,
                               tables.char_gru.fwd.u_update, tables.char_gru.fwd.b_update,
                               tables.char_gru.fwd.w_reset, tables.char_gru.fwd.u_reset,
                               tables.char_gru.fwd.b_reset, tables.char_gru.fwd.w_cand,
                               tables.char_gru.fwd.u_cand, tables.char_gru.fwd.b_cand};
    CHECK(fd_max_rel_err([&] { return sum_all(char_compose("taxi", tables)); }, params) < 1e-4);
}

TEST_CASE("slot tokenization splits on hyphen and space") {
    auto toks = slot_tokens("hotel-name");
    REQUIRE(toks.size() == 2);
    CHECK(toks[0].surface == "hotel");
    CHECK(toks[1].surface == "name");

    auto book = slot_tokens("hotel-book stay");
    REQUIRE(book.size() == 3);
    CHECK(book[2].surface == "stay");

    CHECK_THROWS_AS(slot_tokens("-"), std::invalid_argument);
}

TEST_CASE("embed_slot determinism and shared-word consistency") {
    EmbedConfig c = small_config();
    EmbeddingTables tables = small_tables(c);
    HashProvider provider(c.ctx_layers, c.ctx_dim, 9);
    FeatureRun run;

    Var a = embed_slot(slot_tokens("taxi-leaveat"), tables, provider, run);
    Var a2 = embed_slot(slot_tokens("taxi-leaveat"), tables, provider, run);
    for (std::size_t k = 0; k < a->value.size(); ++k)
        CHECK(a->value.at(k) == a2->value.at(k));

    Var b = embed_slot(slot_tokens("train-leaveat"), tables, provider, run);
    // second token shares its surface but not its left neighbor, so only the
    // non-contextual columns must agree
    std::size_t ctx_off = c.static_dim + c.char_out_dim;
    for (std::size_t j = 0; j < ctx_off; ++j)
        CHECK(a->value(1, j) == doctest::Approx(b->value(1, j)));
    bool first_differs = false;
    for (std::size_t j = 0; j < ctx_off; ++j)
        first_differs = first_differs || a->value(0, j) != b->value(0, j);
    CHECK(first_differs);

    CHECK_THROWS_AS(embed_slot({}, tables, provider, run), std::invalid_argument);
}

TEST_CASE("hash provider is deterministic and context-sensitive") {
    HashProvider p(3, 4, 42);
    auto a = p.embed({"hello", "world"});
    auto b = p.embed({"hello", "world"});
    CHECK(a.size() == 3);
    for (std::size_t l = 0; l < 3; ++l)
        for (std::size_t k = 0; k < a[l].size(); ++k) CHECK(a[l].at(k) == b[l].at(k));

    auto c = p.embed({"hello", "there"});
    bool differ = false;
    for (std::size_t k = 0; k < 4; ++k) differ = differ || a[0](0, k) != c[0](0, k);
    CHECK(differ);  // same word, different right neighbor
}
