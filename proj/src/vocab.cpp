#include "decsal/vocab.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <sstream>

#include "decsal/errors.hpp"
#include "json.hpp"

namespace decsal {

namespace {
const std::vector<std::string>& special_names() {
  static const std::vector<std::string> names{"[PAD]", "[MASK]", "[CLS]", "[SEP]", "[UNK]"};
  return names;
}
}  // namespace

Vocabulary::Vocabulary(std::vector<std::string> content_tokens) {
  tokens_ = special_names();
  for (auto& t : content_tokens) tokens_.push_back(std::move(t));
  if (tokens_.size() < kNumSpecials + 1) {
    throw DataError("Vocabulary: need at least one content token");
  }
  for (std::size_t i = 0; i < tokens_.size(); ++i) {
    auto [it, inserted] = index_.emplace(tokens_[i], static_cast<TokenId>(i));
    if (!inserted) throw DataError("Vocabulary: duplicate token '" + tokens_[i] + "'");
  }
}

const std::string& Vocabulary::token(TokenId id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= tokens_.size()) {
    throw DataError("Vocabulary: id " + std::to_string(id) + " out of range, V=" +
                    std::to_string(tokens_.size()));
  }
  return tokens_[static_cast<std::size_t>(id)];
}

TokenId Vocabulary::id_of(const std::string& token) const {
  auto it = index_.find(token);
  return it == index_.end() ? kUnkId : it->second;
}

bool Vocabulary::contains(const std::string& token) const { return index_.count(token) > 0; }

std::string Vocabulary::to_json() const {
  nlohmann::ordered_json j;
  j["tokens"] = std::vector<std::string>(tokens_.begin() + kNumSpecials, tokens_.end());
  j["specials"] = {{"[PAD]", kPadId},
                   {"[MASK]", kMaskId},
                   {"[CLS]", kClsId},
                   {"[SEP]", kSepId},
                   {"[UNK]", kUnkId}};
  return j.dump(2);
}

Vocabulary Vocabulary::from_json(const std::string& text) {
  nlohmann::json j = nlohmann::json::parse(text);
  return Vocabulary(j.at("tokens").get<std::vector<std::string>>());
}

void Vocabulary::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw DataError("Vocabulary: cannot write " + path.string());
  out << to_json() << "\n";
}

Vocabulary Vocabulary::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("Vocabulary: cannot read " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return from_json(buf.str());
}

std::vector<std::string> tokenize_words(const std::string& text) {
  std::vector<std::string> words;
  std::string cur;
  for (char c : text) {
    const auto uc = static_cast<unsigned char>(c);
    if (std::isalnum(uc) || c == '_' || c == '\'') {
      cur.push_back(static_cast<char>(std::tolower(uc)));
    } else if (!cur.empty()) {
      words.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) words.push_back(std::move(cur));
  return words;
}

Vocabulary build_vocab_from_texts(const std::vector<std::string>& texts, std::size_t max_size,
                                  std::size_t min_freq) {
  // std::map keeps ties resolvable lexicographically without a second sort key.
  std::map<std::string, std::size_t> freq;
  bool any = false;
  for (const auto& text : texts) {
    for (auto& w : tokenize_words(text)) {
      ++freq[w];
      any = true;
    }
  }
  if (!any) throw DataError("build_vocab: empty corpus");

  std::vector<std::pair<std::string, std::size_t>> entries(freq.begin(), freq.end());
  std::stable_sort(entries.begin(), entries.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });

  std::vector<std::string> content;
  for (auto& [tok, count] : entries) {
    if (count < min_freq) continue;
    if (kNumSpecials + content.size() >= max_size) break;
    content.push_back(tok);
  }
  if (content.empty()) throw DataError("build_vocab: no token meets min_freq");
  return Vocabulary(std::move(content));
}

Vocabulary build_vocab(std::istream& corpus, std::size_t max_size, std::size_t min_freq) {
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(corpus, line)) lines.push_back(line);
  return build_vocab_from_texts(lines, max_size, min_freq);
}

TokenSeq encode(const Vocabulary& v, const std::string& text, std::size_t n_max) {
  if (n_max < 3) throw DataError("encode: n_max must be at least 3");
  TokenSeq seq;
  seq.ids.reserve(n_max);
  seq.ids.push_back(kClsId);
  for (const auto& w : tokenize_words(text)) {
    if (seq.ids.size() >= n_max - 1) break;  // keep the first n_max-2 content words
    seq.ids.push_back(v.id_of(w));
  }
  seq.ids.push_back(kSepId);
  while (seq.ids.size() < n_max) seq.ids.push_back(kPadId);
  seq.mask.resize(n_max);
  for (std::size_t i = 0; i < n_max; ++i) seq.mask[i] = seq.ids[i] == kPadId ? 0 : 1;
  return seq;
}

std::string decode_ids(const Vocabulary& v, const std::vector<TokenId>& ids) {
  std::string out;
  for (TokenId id : ids) {
    if (!out.empty()) out.push_back(' ');
    out += v.token(id);
  }
  return out;
}

std::vector<TokenId> TokenSeq::unique_content_ids() const {
  std::vector<TokenId> unique;
  for (TokenId id : ids) {
    if (Vocabulary::is_special(id)) continue;
    if (std::find(unique.begin(), unique.end(), id) == unique.end()) unique.push_back(id);
  }
  return unique;
}

std::vector<std::size_t> TokenSeq::content_positions() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < ids.size(); ++i)
    if (!Vocabulary::is_special(ids[i])) out.push_back(i);
  return out;
}

}  // namespace decsal
