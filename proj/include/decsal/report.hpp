#pragma once

#include <string>
#include <vector>

#include "decsal/evaluation.hpp"
#include "decsal/saliency.hpp"
#include "decsal/vocab.hpp"
#include "json.hpp"

namespace decsal {

// Shortest round-trip decimal form; the one formatter every artifact uses.
std::string format_double(double v);

// fraction,accuracy,explainer,game — rows ordered (game, explainer, fraction).
std::string curves_csv(const std::vector<EvalCurve>& curves);
std::vector<EvalCurve> parse_curves_csv(const std::string& text);

struct AucRow {
  std::string explainer;
  double revealing = 0.0;
  double hiding = 0.0;
};
// explainer,revealing_auc,hiding_auc
std::string auc_csv(const std::vector<AucRow>& rows);

nlohmann::ordered_json saliency_to_json(const SaliencyResult& result, const Vocabulary& vocab);

/// The file-side view of one explanation, as read back from disk.
struct LoadedExplanation {
  std::vector<std::string> tokens;
  std::vector<TokenId> ids;
  std::vector<double> scores;
  std::vector<std::vector<std::size_t>> positions;
  std::vector<double> position_scores;
  std::size_t layer = 0;
  std::string method;
  std::size_t tau = 0;
  bool identity_decoder = false;
  int predicted_class = 0;
  double class_prob = 0.0;
};
LoadedExplanation explanation_from_json(const nlohmann::json& j);

nlohmann::ordered_json rankings_to_json(const std::vector<ClassRanking>& rankings);
nlohmann::ordered_json overlap_to_json(const std::vector<OverlapReport>& reports,
                                       const std::string& explainer);

struct SvgSeries {
  std::string label;
  std::vector<EvalPoint> points;
};
// One polyline per series, axes with ticks, and a legend. Well-formed XML.
std::string curves_svg(const std::string& title, const std::string& x_label,
                       const std::vector<SvgSeries>& series);

struct HighlightSample {
  std::vector<std::string> tokens;          // rendered tokens, specials included
  std::vector<double> scores;               // per position
  std::vector<std::uint8_t> is_content;     // highlight only content positions
  int predicted_class = 0;
  double class_prob = 0.0;
};
// Per-token background intensity is the min-max normalized score within each
// sample. XHTML-conformant output.
std::string highlights_html(const std::string& title, const std::vector<HighlightSample>& samples);

std::string escape_html(const std::string& text);

// Well-formedness check used on every emitted SVG/HTML artifact: balanced
// tags, quoted attributes, sane entities.
bool xml_well_formed(const std::string& text, std::string* error = nullptr);

// Subset JSON-Schema validation: type, properties, required, items, enum,
// additionalProperties, minimum, minItems.
bool validate_schema(const nlohmann::json& doc, const nlohmann::json& schema, std::string* error);

}  // namespace decsal
