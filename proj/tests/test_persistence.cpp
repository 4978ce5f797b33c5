#include <gtest/gtest.h>

#include <cstring>
#include <fstream>
#include <sstream>

#include "kgec/checkpoint.hpp"
#include "kgec/config.hpp"
#include "kgec/manifest.hpp"
#include "support/synthetic_kg.hpp"

using namespace kgec;

namespace {

ModelParams sample_params() {
    auto p = init_params(5, 2, 3, 17);
    p.relation_re(1, 2) = 1.0 / 3.0;
    p.entity_im(4, 0) = 0.1;
    return p;
}

std::string bytes_of(const ModelParams& p, Precision prec) {
    std::ostringstream out(std::ios::binary);
    write_checkpoint(out, p, prec);
    return out.str();
}

std::vector<double> values(const Matrix& m) { return {m.data().begin(), m.data().end()}; }

}  // namespace

TEST(Checkpoint, Float64RoundTripIsExact) {
    auto p = sample_params();
    std::istringstream in(bytes_of(p, Precision::Float64), std::ios::binary);
    CheckpointHeader h;
    auto q = read_checkpoint(in, &h);
    EXPECT_EQ(h.precision, Precision::Float64);
    EXPECT_EQ(values(q.entity_re), values(p.entity_re));
    EXPECT_EQ(values(q.entity_im), values(p.entity_im));
    EXPECT_EQ(values(q.relation_re), values(p.relation_re));
    EXPECT_EQ(values(q.relation_im), values(p.relation_im));
}

TEST(Checkpoint, Float32RoundTripRoundsToFloat) {
    auto p = sample_params();
    std::istringstream in(bytes_of(p, Precision::Float32), std::ios::binary);
    auto q = read_checkpoint(in);
    EXPECT_EQ(q.relation_re(1, 2), static_cast<double>(static_cast<float>(1.0 / 3.0)));
    for (std::size_t i = 0; i < p.entity_re.data().size(); ++i)
        EXPECT_EQ(q.entity_re.data()[i], static_cast<double>(static_cast<float>(p.entity_re.data()[i])));
}

TEST(Checkpoint, HeaderLayout) {
    auto bytes = bytes_of(sample_params(), Precision::Float32);
    ASSERT_EQ(bytes.size(), 5u + 3 * 8 + 4 + 4 * (5 * 3 + 5 * 3 + 2 * 3 + 2 * 3));
    EXPECT_EQ(bytes.substr(0, 5), "KGEC1");
    auto u64_at = [&](std::size_t off) {
        std::uint64_t v = 0;
        for (int i = 7; i >= 0; --i) v = (v << 8) | static_cast<unsigned char>(bytes[off + i]);
        return v;
    };
    EXPECT_EQ(u64_at(5), 5u);
    EXPECT_EQ(u64_at(13), 2u);
    EXPECT_EQ(u64_at(21), 3u);
    EXPECT_EQ(static_cast<unsigned char>(bytes[29]), 4);
    EXPECT_EQ(bytes.substr(30, 3), std::string(3, '\0'));
}

TEST(Checkpoint, RejectsCorruptInput) {
    auto bytes = bytes_of(sample_params(), Precision::Float64);
    {
        std::istringstream in(bytes + "x", std::ios::binary);
        EXPECT_THROW(read_checkpoint(in), CheckpointError);
    }
    {
        std::istringstream in(bytes.substr(0, bytes.size() - 1), std::ios::binary);
        EXPECT_THROW(read_checkpoint(in), CheckpointError);
    }
    {
        auto bad = bytes;
        bad[0] = 'X';
        std::istringstream in(bad, std::ios::binary);
        EXPECT_THROW(read_checkpoint(in), CheckpointError);
    }
    {
        auto bad = bytes;
        bad[29] = 2;
        std::istringstream in(bad, std::ios::binary);
        EXPECT_THROW(read_checkpoint(in), CheckpointError);
    }
}

TEST(Checkpoint, SaveAndLoadWithVocabulary) {
    testkit::TempDir dir("ckpt");
    auto p = sample_params();
    auto vocab = testkit::numbered_vocab(5, 2);
    save_checkpoint(dir / "model.bin", p, vocab, Precision::Float64);
    EXPECT_TRUE(std::filesystem::exists(vocab_sidecar_path(dir / "model.bin")));
    auto loaded = load_checkpoint(dir / "model.bin");
    EXPECT_EQ(values(loaded.params.entity_re), values(p.entity_re));
    EXPECT_EQ(loaded.vocab.entities.name(3), "e3");
    EXPECT_EQ(loaded.vocab.relations.name(1), "r1");
    EXPECT_THROW(save_checkpoint(dir / "bad.bin", p, testkit::numbered_vocab(4, 2), Precision::Float64),
                 CheckpointError);
}

TEST(Checkpoint, MissingFileNamesPath) {
    try {
        load_checkpoint("/nonexistent/model.bin");
        FAIL();
    } catch (const CheckpointError& e) {
        EXPECT_NE(std::string(e.what()).find("/nonexistent/model.bin"), std::string::npos);
    }
}

TEST(Checkpoint, MissingSidecarIsAnError) {
    testkit::TempDir dir("ckpt_sidecar");
    save_checkpoint(dir / "m.bin", sample_params(), testkit::numbered_vocab(5, 2), Precision::Float32);
    std::filesystem::remove(vocab_sidecar_path(dir / "m.bin"));
    EXPECT_THROW(load_checkpoint(dir / "m.bin"), CheckpointError);
}

TEST(Config, ParsesKeysCommentsAndLists) {
    std::istringstream in(
        "# comment\n"
        "d = 150\n"
        "eta=0.03   # trailing\n"
        "\n"
        "neg_ratio = 2\n"
        "lr = 0.1\n"
        "mu = 1e-5\n"
        "projection = false\n"
        "l2_scope = full\n"
        "precision = float64\n"
        "grid_lr = 0.1, 0.5\n"
        "grid_d = 10\n");
    auto cfg = parse_config(in);
    EXPECT_EQ(cfg.train.dim, 150u);
    EXPECT_EQ(cfg.train.eta, 0.03);
    EXPECT_EQ(cfg.train.neg_ratio, 2u);
    EXPECT_EQ(cfg.train.mu, 1e-5);
    EXPECT_FALSE(cfg.train.projection);
    EXPECT_EQ(cfg.train.l2_scope, L2Scope::Full);
    EXPECT_EQ(cfg.train.precision, Precision::Float64);
    EXPECT_EQ(cfg.grid.lrs, (std::vector<double>{0.1, 0.5}));
    EXPECT_EQ(cfg.grid.dims, (std::vector<std::size_t>{10}));
    EXPECT_EQ(cfg.grid.mus.size(), 11u);
}

TEST(Config, Errors) {
    auto fails_with = [](const std::string& text, const std::string& needle) {
        std::istringstream in(text);
        try {
            parse_config(in, "x.cfg");
        } catch (const ConfigError& e) {
            return std::string(e.what()).find(needle) != std::string::npos;
        }
        return false;
    };
    EXPECT_TRUE(fails_with("dim = 3\n", "x.cfg:1: unknown config key 'dim'"));
    EXPECT_TRUE(fails_with("d = 3\nlr = fast\n", "x.cfg:2"));
    EXPECT_TRUE(fails_with("d 3\n", "expected key = value"));
    EXPECT_TRUE(fails_with("lr = -1\n", "lr must be > 0"));
    EXPECT_TRUE(fails_with("grid_mu = \n", "empty list"));
    EXPECT_THROW(load_config("/nonexistent.cfg"), ConfigError);
}

TEST(Config, TextRoundTrip) {
    TrainConfig c;
    c.dim = 7;
    c.eta = 0.1 + 0.2;
    c.mu = 1e-5;
    c.lr = 1.0 / 3.0;
    c.seed = 123456789012345ULL;
    c.projection = false;
    c.precision = Precision::Float64;
    std::istringstream in(to_config_text(c));
    EXPECT_EQ(parse_config(in).train, c);
}

TEST(Config, ShippedConfigsParse) {
    for (const char* name : {"wn18.cfg", "fb15k.cfg", "db100k.cfg"}) {
        auto cfg = load_config(std::filesystem::path(KGEC_CONFIG_DIR) / name);
        EXPECT_GE(cfg.train.mu, 0.0) << name;
    }
}

TEST(Manifest, Sha256KnownValues) {
    testkit::TempDir dir("sha");
    std::ofstream(dir / "abc") << "abc";
    std::ofstream(dir / "empty");
    EXPECT_EQ(sha256_file(dir / "abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    EXPECT_EQ(sha256_file(dir / "empty"), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
}

TEST(Manifest, JsonRoundTripAndChangeDetection) {
    testkit::TempDir dir("manifest");
    std::ofstream(dir / "train.txt") << "a\tr\tb\n";
    RunManifest m;
    m.config.seed = 42;
    m.config.mu = 0.25;
    m.data_dir = dir.path();
    m.inputs.push_back(hash_input("train", dir / "train.txt"));
    m.outputs.emplace_back("checkpoint", dir / "c.bin");
    write_manifest(dir / "manifest.json", m);
    auto back = read_manifest(dir / "manifest.json");
    EXPECT_EQ(back.config, m.config);
    EXPECT_EQ(back.seed(), 42u);
    ASSERT_NE(find_input(back, "train"), nullptr);
    EXPECT_EQ(find_input(back, "train")->sha256, m.inputs[0].sha256);
    EXPECT_EQ(find_input(back, "test"), nullptr);
    EXPECT_TRUE(changed_inputs(back).empty());
    std::ofstream(dir / "train.txt", std::ios::app) << "b\tr\ta\n";
    EXPECT_EQ(changed_inputs(back).size(), 1u);
    std::filesystem::remove(dir / "train.txt");
    EXPECT_EQ(changed_inputs(back).size(), 1u);
}
