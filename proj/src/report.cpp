#include "decsal/report.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <map>
#include <sstream>

#include "decsal/errors.hpp"

namespace decsal {

std::string format_double(double v) {
  char buf[32];
  auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc()) throw NumericError("format_double: cannot format value");
  return std::string(buf, p);
}

std::string curves_csv(const std::vector<EvalCurve>& curves) {
  std::vector<const EvalCurve*> ordered;
  for (const auto& c : curves) ordered.push_back(&c);
  std::stable_sort(ordered.begin(), ordered.end(), [](const EvalCurve* a, const EvalCurve* b) {
    if (a->game != b->game) return a->game < b->game;
    return a->explainer < b->explainer;
  });
  std::string out = "fraction,accuracy,explainer,game\n";
  for (const EvalCurve* c : ordered) {
    for (const auto& p : c->points) {
      out += format_double(p.fraction);
      out += ',';
      out += format_double(p.accuracy);
      out += ',';
      out += c->explainer;
      out += ',';
      out += game_name(c->game);
      out += '\n';
    }
  }
  return out;
}

std::vector<EvalCurve> parse_curves_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != "fraction,accuracy,explainer,game") {
    throw DataError("curves csv: bad header");
  }
  std::map<std::pair<std::string, std::string>, EvalCurve> curves;
  std::vector<std::pair<std::string, std::string>> order;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string fraction, accuracy, explainer, game;
    if (!std::getline(row, fraction, ',') || !std::getline(row, accuracy, ',') ||
        !std::getline(row, explainer, ',') || !std::getline(row, game)) {
      throw DataError("curves csv: bad row: " + line);
    }
    auto key = std::make_pair(game, explainer);
    if (!curves.count(key)) {
      EvalCurve c;
      c.game = game == "hiding" ? Game::kHiding : Game::kRevealing;
      c.explainer = explainer;
      curves[key] = std::move(c);
      order.push_back(key);
    }
    curves[key].points.push_back({std::stod(fraction), std::stod(accuracy)});
  }
  std::vector<EvalCurve> out;
  for (const auto& key : order) out.push_back(std::move(curves[key]));
  return out;
}

std::string auc_csv(const std::vector<AucRow>& rows) {
  std::string out = "explainer,revealing_auc,hiding_auc\n";
  for (const auto& r : rows) {
    out += r.explainer;
    out += ',';
    out += format_double(r.revealing);
    out += ',';
    out += format_double(r.hiding);
    out += '\n';
  }
  return out;
}

nlohmann::ordered_json saliency_to_json(const SaliencyResult& result, const Vocabulary& vocab) {
  nlohmann::ordered_json tokens = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < result.token_ids.size(); ++i) {
    tokens.push_back({{"token", vocab.token(result.token_ids[i])},
                      {"id", result.token_ids[i]},
                      {"score", result.scores[i]},
                      {"positions", result.positions[i]}});
  }
  nlohmann::ordered_json j;
  j["tokens"] = std::move(tokens);
  j["metadata"] = {{"layer", result.layer},
                   {"method", method_name(result.method)},
                   {"tau", result.tau},
                   {"identity_decoder", result.identity_decoder},
                   {"predicted_class", result.predicted_class},
                   {"explained_class", result.explained_class},
                   {"class_prob", result.class_prob},
                   {"position_scores", result.position_scores}};
  return j;
}

LoadedExplanation explanation_from_json(const nlohmann::json& j) {
  LoadedExplanation out;
  for (const auto& tok : j.at("tokens")) {
    out.tokens.push_back(tok.at("token").get<std::string>());
    out.ids.push_back(tok.at("id").get<TokenId>());
    out.scores.push_back(tok.at("score").get<double>());
    out.positions.push_back(tok.at("positions").get<std::vector<std::size_t>>());
  }
  const auto& meta = j.at("metadata");
  out.layer = meta.at("layer").get<std::size_t>();
  out.method = meta.at("method").get<std::string>();
  out.tau = meta.at("tau").get<std::size_t>();
  out.identity_decoder = meta.at("identity_decoder").get<bool>();
  out.predicted_class = meta.at("predicted_class").get<int>();
  out.class_prob = meta.at("class_prob").get<double>();
  out.position_scores = meta.at("position_scores").get<std::vector<double>>();
  return out;
}

nlohmann::ordered_json rankings_to_json(const std::vector<ClassRanking>& rankings) {
  nlohmann::ordered_json by_class = nlohmann::ordered_json::object();
  for (const auto& r : rankings) {
    nlohmann::ordered_json tokens = nlohmann::ordered_json::array();
    for (const auto& t : r.tokens) tokens.push_back({{"token", t.token}, {"weight", t.weight}});
    by_class[std::to_string(r.cls)] = std::move(tokens);
  }
  return by_class;
}

nlohmann::ordered_json overlap_to_json(const std::vector<OverlapReport>& reports,
                                       const std::string& explainer) {
  nlohmann::ordered_json out;
  out["explainer"] = explainer;
  nlohmann::ordered_json entries = nlohmann::ordered_json::array();
  for (const auto& r : reports) {
    nlohmann::ordered_json pairs = nlohmann::ordered_json::array();
    for (const auto& p : r.pairs) {
      pairs.push_back({{"class_a", p.class_a},
                       {"class_b", p.class_b},
                       {"tokens", p.tokens},
                       {"count", p.count},
                       {"percentage", p.percentage}});
    }
    entries.push_back({{"requested_k", r.requested_k},
                       {"k", r.k},
                       {"percentage", r.percentage},
                       {"pairs", std::move(pairs)}});
  }
  out["by_k"] = std::move(entries);
  return out;
}

namespace {

std::string escape_xml(const std::string& text) {
  std::string out;
  out.reserve(text.size());
  for (char c : text) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      case '\'': out += "&apos;"; break;
      default: out.push_back(c);
    }
  }
  return out;
}

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd",
                          "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};

}  // namespace

std::string escape_html(const std::string& text) { return escape_xml(text); }

std::string curves_svg(const std::string& title, const std::string& x_label,
                       const std::vector<SvgSeries>& series) {
  const double width = 820, height = 520;
  const double left = 70, right = 640, top = 50, bottom = 460;
  auto sx = [&](double f) { return left + f * (right - left); };
  auto sy = [&](double a) { return bottom - a * (bottom - top); };

  std::ostringstream svg;
  svg << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 " << width << " " << height
      << "\" font-family=\"sans-serif\">\n";
  svg << "<rect x=\"0\" y=\"0\" width=\"" << width << "\" height=\"" << height
      << "\" fill=\"white\"/>\n";
  svg << "<text x=\"" << (left + right) / 2 << "\" y=\"28\" text-anchor=\"middle\" "
      << "font-size=\"18\">" << escape_xml(title) << "</text>\n";
  // Axes
  svg << "<line x1=\"" << left << "\" y1=\"" << bottom << "\" x2=\"" << right << "\" y2=\""
      << bottom << "\" stroke=\"black\"/>\n";
  svg << "<line x1=\"" << left << "\" y1=\"" << top << "\" x2=\"" << left << "\" y2=\"" << bottom
      << "\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 5; ++i) {
    const double v = i / 5.0;
    svg << "<line x1=\"" << sx(v) << "\" y1=\"" << bottom << "\" x2=\"" << sx(v) << "\" y2=\""
        << bottom + 6 << "\" stroke=\"black\"/>\n";
    svg << "<text x=\"" << sx(v) << "\" y=\"" << bottom + 22
        << "\" text-anchor=\"middle\" font-size=\"12\">" << format_double(v) << "</text>\n";
    svg << "<line x1=\"" << left - 6 << "\" y1=\"" << sy(v) << "\" x2=\"" << left << "\" y2=\""
        << sy(v) << "\" stroke=\"black\"/>\n";
    svg << "<text x=\"" << left - 10 << "\" y=\"" << sy(v) + 4
        << "\" text-anchor=\"end\" font-size=\"12\">" << format_double(v) << "</text>\n";
  }
  svg << "<text x=\"" << (left + right) / 2 << "\" y=\"" << bottom + 45
      << "\" text-anchor=\"middle\" font-size=\"14\">" << escape_xml(x_label) << "</text>\n";
  svg << "<text x=\"20\" y=\"" << (top + bottom) / 2
      << "\" text-anchor=\"middle\" font-size=\"14\" transform=\"rotate(-90 20 "
      << (top + bottom) / 2 << ")\">accuracy</text>\n";

  for (std::size_t s = 0; s < series.size(); ++s) {
    const char* color = kPalette[s % (sizeof(kPalette) / sizeof(kPalette[0]))];
    svg << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"";
    for (std::size_t i = 0; i < series[s].points.size(); ++i) {
      if (i) svg << ' ';
      svg << format_double(sx(series[s].points[i].fraction)) << ','
          << format_double(sy(series[s].points[i].accuracy));
    }
    svg << "\"/>\n";
    const double ly = top + 18 * static_cast<double>(s);
    svg << "<line x1=\"" << right + 16 << "\" y1=\"" << ly << "\" x2=\"" << right + 44
        << "\" y2=\"" << ly << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
    svg << "<text x=\"" << right + 50 << "\" y=\"" << ly + 4 << "\" font-size=\"12\">"
        << escape_xml(series[s].label) << "</text>\n";
  }
  svg << "</svg>\n";
  return svg.str();
}

std::string highlights_html(const std::string& title,
                            const std::vector<HighlightSample>& samples) {
  std::ostringstream html;
  html << "<!DOCTYPE html>\n<html lang=\"en\"><head><meta charset=\"utf-8\"/>";
  html << "<title>" << escape_xml(title) << "</title>";
  html << "<style>body{font-family:sans-serif;margin:2em}"
       << ".sample{margin-bottom:1.2em}"
       << ".tok{padding:2px 3px;border-radius:3px;margin-right:2px}"
       << ".special{color:#999}"
       << "h3{margin-bottom:0.3em;font-size:0.95em;color:#333}</style></head><body>\n";
  html << "<h1>" << escape_xml(title) << "</h1>\n";
  for (std::size_t s = 0; s < samples.size(); ++s) {
    const auto& sample = samples[s];
    double lo = 0.0, hi = 0.0;
    bool first = true;
    for (std::size_t i = 0; i < sample.tokens.size(); ++i) {
      if (!sample.is_content[i]) continue;
      if (first || sample.scores[i] < lo) lo = sample.scores[i];
      if (first || sample.scores[i] > hi) hi = sample.scores[i];
      first = false;
    }
    const double span = hi - lo;
    html << "<div class=\"sample\"><h3>#" << s << " predicted class " << sample.predicted_class
         << " (p=" << format_double(sample.class_prob) << ")</h3><p>";
    for (std::size_t i = 0; i < sample.tokens.size(); ++i) {
      if (!sample.is_content[i]) {
        html << "<span class=\"tok special\">" << escape_xml(sample.tokens[i]) << "</span>";
        continue;
      }
      const double intensity = span > 0.0 ? (sample.scores[i] - lo) / span
                                          : (hi > 0.0 ? 1.0 : 0.0);
      html << "<span class=\"tok\" style=\"background:rgba(255,130,0," << format_double(intensity)
           << ")\">" << escape_xml(sample.tokens[i]) << "</span>";
    }
    html << "</p></div>\n";
  }
  html << "</body></html>\n";
  return html.str();
}

bool xml_well_formed(const std::string& text, std::string* error) {
  auto set_error = [&](const std::string& what) {
    if (error) *error = what;
    return false;
  };
  std::vector<std::string> stack;
  std::size_t i = 0;
  const std::size_t n = text.size();
  while (i < n) {
    if (text[i] == '&') {
      std::size_t semi = text.find(';', i);
      if (semi == std::string::npos || semi - i > 8) return set_error("bare ampersand");
      i = semi + 1;
      continue;
    }
    if (text[i] != '<') {
      ++i;
      continue;
    }
    if (text.compare(i, 4, "<!--") == 0) {
      std::size_t end = text.find("-->", i);
      if (end == std::string::npos) return set_error("unterminated comment");
      i = end + 3;
      continue;
    }
    if (text.compare(i, 2, "<?") == 0 || text.compare(i, 2, "<!") == 0) {
      std::size_t end = text.find('>', i);
      if (end == std::string::npos) return set_error("unterminated declaration");
      i = end + 1;
      continue;
    }
    std::size_t end = i + 1;
    bool in_quote = false;
    char quote = 0;
    while (end < n && (in_quote || text[end] != '>')) {
      if (in_quote) {
        if (text[end] == quote) in_quote = false;
      } else if (text[end] == '"' || text[end] == '\'') {
        in_quote = true;
        quote = text[end];
      } else if (text[end] == '<') {
        return set_error("nested '<'");
      }
      ++end;
    }
    if (end >= n) return set_error("unterminated tag");
    std::string body = text.substr(i + 1, end - i - 1);
    const bool closing = !body.empty() && body.front() == '/';
    const bool self_closing = !body.empty() && body.back() == '/';
    std::string name;
    std::size_t k = closing ? 1 : 0;
    while (k < body.size() && (std::isalnum(static_cast<unsigned char>(body[k])) ||
                               body[k] == '-' || body[k] == ':')) {
      name.push_back(body[k++]);
    }
    if (name.empty()) return set_error("empty tag name");
    // Attribute values must be quoted.
    for (std::size_t a = k; a < body.size(); ++a) {
      if (body[a] == '=') {
        std::size_t v = a + 1;
        while (v < body.size() && body[v] == ' ') ++v;
        if (v >= body.size() || (body[v] != '"' && body[v] != '\'')) {
          return set_error("unquoted attribute in <" + name + ">");
        }
        std::size_t close = body.find(body[v], v + 1);
        if (close == std::string::npos) return set_error("unterminated attribute value");
        a = close;
      }
    }
    if (closing) {
      if (stack.empty() || stack.back() != name) return set_error("mismatched </" + name + ">");
      stack.pop_back();
    } else if (!self_closing) {
      stack.push_back(name);
    }
    i = end + 1;
  }
  if (!stack.empty()) return set_error("unclosed <" + stack.back() + ">");
  return true;
}

namespace {

bool type_matches(const nlohmann::json& doc, const std::string& type) {
  if (type == "object") return doc.is_object();
  if (type == "array") return doc.is_array();
  if (type == "string") return doc.is_string();
  if (type == "integer") return doc.is_number_integer();
  if (type == "number") return doc.is_number();
  if (type == "boolean") return doc.is_boolean();
  if (type == "null") return doc.is_null();
  return false;
}

bool validate_at(const nlohmann::json& doc, const nlohmann::json& schema, const std::string& where,
                 std::string* error) {
  auto set_error = [&](const std::string& what) {
    if (error) *error = where + ": " + what;
    return false;
  };
  if (schema.contains("type") && !type_matches(doc, schema["type"].get<std::string>())) {
    return set_error("expected type " + schema["type"].get<std::string>());
  }
  if (schema.contains("enum")) {
    bool found = false;
    for (const auto& v : schema["enum"]) found |= v == doc;
    if (!found) return set_error("value not in enum");
  }
  if (schema.contains("minimum") && doc.is_number() &&
      doc.get<double>() < schema["minimum"].get<double>()) {
    return set_error("below minimum");
  }
  if (doc.is_object()) {
    if (schema.contains("required")) {
      for (const auto& key : schema["required"]) {
        if (!doc.contains(key.get<std::string>())) {
          return set_error("missing required key '" + key.get<std::string>() + "'");
        }
      }
    }
    if (schema.contains("properties")) {
      for (const auto& [key, sub] : schema["properties"].items()) {
        if (doc.contains(key) &&
            !validate_at(doc[key], sub, where + "." + key, error)) {
          return false;
        }
      }
      if (schema.value("additionalProperties", true) == false) {
        for (const auto& [key, value] : doc.items()) {
          if (!schema["properties"].contains(key)) {
            return set_error("unexpected key '" + key + "'");
          }
        }
      }
    }
  }
  if (doc.is_array()) {
    if (schema.contains("minItems") && doc.size() < schema["minItems"].get<std::size_t>()) {
      return set_error("fewer than minItems entries");
    }
    if (schema.contains("items")) {
      for (std::size_t i = 0; i < doc.size(); ++i) {
        if (!validate_at(doc[i], schema["items"], where + "[" + std::to_string(i) + "]", error)) {
          return false;
        }
      }
    }
  }
  return true;
}

}  // namespace

bool validate_schema(const nlohmann::json& doc, const nlohmann::json& schema,
                     std::string* error) {
  return validate_at(doc, schema, "$", error);
}

}  // namespace decsal
