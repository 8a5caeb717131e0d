#include "decsal/config.hpp"

#include <filesystem>
#include <fstream>

#include "decsal/errors.hpp"
#include "decsal/toml.hpp"
#include "doctest.h"

using namespace decsal;
namespace fs = std::filesystem;

TEST_CASE("toml parses sections, scalars, arrays, and comments") {
  const std::string text = R"(# heading comment
[alpha]
name = "hello \"world\""   # trailing comment
count = 42
rate = 1.5e-3
flag = true
items = [1, 2, 3]
words = ["a", "b"]
negative = -7

[beta]
empty = []
)";
  TomlTable table = parse_toml(text);
  CHECK(table.at("alpha").at("name").str == "hello \"world\"");
  CHECK(table.at("alpha").at("count").integer == 42);
  CHECK(table.at("alpha").at("rate").number == doctest::Approx(1.5e-3));
  CHECK(table.at("alpha").at("flag").boolean == true);
  REQUIRE(table.at("alpha").at("items").array.size() == 3);
  CHECK(table.at("alpha").at("items").array[2].integer == 3);
  CHECK(table.at("alpha").at("words").array[1].str == "b");
  CHECK(table.at("alpha").at("negative").integer == -7);
  CHECK(table.at("beta").at("empty").array.empty());
}

TEST_CASE("toml reports parse errors with line numbers") {
  CHECK_THROWS_WITH_AS(parse_toml("[alpha]\nkey 42\n"), doctest::Contains("line 2"), ConfigError);
  CHECK_THROWS_WITH_AS(parse_toml("key = \"unterminated\nmore = 1\n"),
                       doctest::Contains("line 1"), ConfigError);
  CHECK_THROWS_AS(parse_toml("[alpha]\nx = 1\n[alpha]\ny = 2\n"), ConfigError);
  CHECK_THROWS_AS(parse_toml("[alpha]\nx = 1\nx = 2\n"), ConfigError);
  CHECK_THROWS_AS(parse_toml("[alpha]\nmixed = [1, \"a\"]\n"), ConfigError);
}

namespace {

struct TempTree {
  fs::path root;
  TempTree() {
    root = fs::temp_directory_path() / "decsal_cfg_test";
    fs::create_directories(root);
    write("train.jsonl", "{\"text\": \"a b\", \"label\": 0}\n{\"text\": \"c d\", \"label\": 1}\n");
    write("validation.jsonl", "{\"text\": \"a b\", \"label\": 0}\n");
    write("test.jsonl", "{\"text\": \"a b\", \"label\": 0}\n");
    write("reference.txt", "a b c\n");
  }
  ~TempTree() { fs::remove_all(root); }
  void write(const std::string& name, const std::string& content) const {
    std::ofstream out(root / name);
    out << content;
  }
  fs::path config(const std::string& body) const {
    const std::string io = "\n[io]\ntrain = \"train.jsonl\"\nvalidation = \"validation.jsonl\"\n"
                           "test = \"test.jsonl\"\n";
    const std::string eval = "\n[evaluation]\nreference_corpus = \"reference.txt\"\n";
    write("config.toml", body + eval + io);
    return root / "config.toml";
  }
};

}  // namespace

TEST_CASE("config loads with defaults and resolves relative paths") {
  TempTree tree;
  ExperimentConfig cfg = load_config(tree.config("[model]\nhidden = 32\nheads = 2\n"));
  CHECK(cfg.model.hidden == 32);
  CHECK(cfg.model.layers == 4);
  CHECK(cfg.training.pretrain_epochs == 30);
  CHECK(cfg.evaluation.random_trials == 20);
  CHECK(cfg.evaluation.k_list == std::vector<std::size_t>{5, 10, 20, 50});
  CHECK(cfg.evaluation.fractions.size() == 21);
  CHECK(cfg.saliency.layers == std::vector<std::size_t>{3, 4});
  CHECK(fs::exists(cfg.io.train_path));
  CHECK_FALSE(cfg.saliency.tau.has_value());

  ModelConfig mc = cfg.model_config(100, 2);
  CHECK(mc.vocab_size == 100);
  CHECK(mc.classes == 2);
}

TEST_CASE("config rejects unknown keys and sections") {
  TempTree tree;
  CHECK_THROWS_WITH_AS(load_config(tree.config("[model]\nwidth = 32\n")),
                       doctest::Contains("width"), ConfigError);
  CHECK_THROWS_WITH_AS(load_config(tree.config("[modle]\nhidden = 32\n")),
                       doctest::Contains("modle"), ConfigError);
  CHECK_THROWS_AS(load_config(tree.config("stray = 1\n")), ConfigError);
}

TEST_CASE("config validates numeric ranges") {
  TempTree tree;
  CHECK_THROWS_AS(load_config(tree.config("[model]\nhidden = 30\nheads = 4\n")), ConfigError);
  CHECK_THROWS_AS(load_config(tree.config("[training]\nmask_rate = 0.0\n")), ConfigError);
  CHECK_THROWS_AS(load_config(tree.config("[training]\nmask_keep_rate = 0.9\nmask_random_rate = 0.2\n")),
                  ConfigError);
  CHECK_THROWS_AS(load_config(tree.config("[saliency]\nlayers = [9]\n")), ConfigError);
  CHECK_THROWS_AS(load_config(tree.config("[saliency]\nmethods = [\"occlusion\"]\n")),
                  ConfigError);
  CHECK_THROWS_AS(load_config(tree.config("[evaluation]\nfractions = [0.0, 0.5]\n")), ConfigError);
}

TEST_CASE("config requires referenced paths to exist") {
  TempTree tree;
  const std::string body = "[model]\nhidden = 32\nheads = 2\n";
  fs::path cfg_path = tree.config(body);
  fs::remove(tree.root / "test.jsonl");
  CHECK_THROWS_WITH_AS(load_config(cfg_path), doctest::Contains("test"), ConfigError);
}

TEST_CASE("config hash changes iff the file changes") {
  TempTree tree;
  fs::path cfg_path = tree.config("[model]\nhidden = 32\nheads = 2\n");
  const std::string h1 = config_hash_hex(cfg_path);
  const std::string h2 = config_hash_hex(cfg_path);
  CHECK(h1 == h2);
  CHECK(h1.size() == 16);
  tree.config("[model]\nhidden = 64\nheads = 2\n");
  CHECK(config_hash_hex(cfg_path) != h1);
}

TEST_CASE("the shipped example configs parse") {
  // Parse-only: the referenced data directories exist only after synth runs.
  TomlTable example = parse_toml_file(fs::path(TEST_SOURCE_DIR) / "../configs/example.toml");
  CHECK(example.count("model"));
  CHECK(example.count("training"));
  CHECK(example.count("saliency"));
  CHECK(example.count("evaluation"));
  CHECK(example.count("io"));
  TomlTable full = parse_toml_file(fs::path(TEST_SOURCE_DIR) / "../configs/paper_full.toml");
  CHECK(full.at("model").at("layers").integer == 12);
  CHECK(full.at("evaluation").at("random_trials").integer == 20);
}
