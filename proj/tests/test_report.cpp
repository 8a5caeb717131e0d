#include "decsal/report.hpp"

#include <fstream>

#include "decsal/errors.hpp"
#include "doctest.h"

using namespace decsal;

TEST_CASE("format_double round-trips") {
  for (double v : {0.0, 1.0, 0.3333333333333333, -2.5e-7, 0.867}) {
    CHECK(std::stod(format_double(v)) == v);
  }
}

TEST_CASE("curves csv writes sorted rows and parses back") {
  EvalCurve h{Game::kHiding, "b", {{0.0, 1.0}, {0.5, 0.75}, {1.0, 0.25}}};
  EvalCurve r{Game::kRevealing, "a", {{0.0, 0.25}, {1.0, 1.0}}};
  const std::string csv = curves_csv({r, h});
  CHECK(csv.rfind("fraction,accuracy,explainer,game\n", 0) == 0);
  CHECK(csv.find("0.5,0.75,b,hiding") != std::string::npos);

  auto back = parse_curves_csv(csv);
  REQUIRE(back.size() == 2);
  CHECK(back[0].game == Game::kHiding);
  CHECK(back[0].explainer == "b");
  REQUIRE(back[0].points.size() == 3);
  CHECK(back[0].points[1].accuracy == 0.75);
  CHECK(back[1].game == Game::kRevealing);
}

TEST_CASE("auc csv mirrors the table layout") {
  const std::string csv = auc_csv({{"decoded_gradcam_l3", 0.867, 0.609}, {"random", 0.748, 0.77}});
  CHECK(csv == "explainer,revealing_auc,hiding_auc\n"
               "decoded_gradcam_l3,0.867,0.609\n"
               "random,0.748,0.77\n");
}

TEST_CASE("saliency json round-trips and validates against the shipped schema") {
  Vocabulary vocab({"big", "dog"});
  SaliencyResult res;
  res.token_ids = {vocab.id_of("big"), vocab.id_of("dog")};
  res.positions = {{1}, {2}};
  res.scores = {0.75, 0.25};
  res.position_scores = {0.0, 0.75, 0.25, 0.0};
  res.layer = 3;
  res.method = SaliencyMethod::kGradCam;
  res.tau = 2;
  res.predicted_class = 1;
  res.explained_class = 1;
  res.class_prob = 0.9;

  nlohmann::ordered_json j = saliency_to_json(res, vocab);
  std::ifstream schema_file(std::string(TEST_SOURCE_DIR) +
                            "/../schemas/saliency_result.schema.json");
  REQUIRE(schema_file.good());
  nlohmann::json schema = nlohmann::json::parse(schema_file);
  std::string error;
  CHECK_MESSAGE(validate_schema(j, schema, &error), error);

  LoadedExplanation back = explanation_from_json(j);
  CHECK(back.tokens == std::vector<std::string>{"big", "dog"});
  CHECK(back.scores == res.scores);
  CHECK(back.position_scores == res.position_scores);
  CHECK(back.layer == 3);
  CHECK(back.method == "gradcam");
  CHECK(back.predicted_class == 1);
}

TEST_CASE("schema validation rejects shape violations") {
  nlohmann::json schema = {
      {"type", "object"},
      {"required", {"name"}},
      {"additionalProperties", false},
      {"properties",
       {{"name", {{"type", "string"}}}, {"count", {{"type", "integer"}, {"minimum", 0}}}}}};
  std::string error;
  CHECK(validate_schema({{"name", "x"}, {"count", 3}}, schema, &error));
  CHECK_FALSE(validate_schema({{"count", 3}}, schema, &error));
  CHECK(error.find("name") != std::string::npos);
  CHECK_FALSE(validate_schema({{"name", "x"}, {"count", -1}}, schema, &error));
  CHECK_FALSE(validate_schema({{"name", "x"}, {"extra", 1}}, schema, &error));
  CHECK_FALSE(validate_schema({{"name", 7}}, schema, &error));
}

TEST_CASE("svg output is well-formed with one polyline per series") {
  std::vector<SvgSeries> series{
      {"decoded & co", {{0.0, 0.2}, {0.5, 0.8}, {1.0, 1.0}}},
      {"random <baseline>", {{0.0, 0.2}, {0.5, 0.5}, {1.0, 1.0}}},
  };
  const std::string svg = curves_svg("Revealing game", "fraction revealed", series);
  std::string error;
  CHECK_MESSAGE(xml_well_formed(svg, &error), error);
  std::size_t polylines = 0, at = 0;
  while ((at = svg.find("<polyline", at)) != std::string::npos) {
    ++polylines;
    ++at;
  }
  CHECK(polylines == 2);
  CHECK(svg.find("random &lt;baseline&gt;") != std::string::npos);
}

TEST_CASE("highlight html escapes text and normalizes per sample") {
  HighlightSample sample;
  sample.tokens = {"[CLS]", "big", "<dog>", "[SEP]"};
  sample.scores = {0.0, 2.0, 6.0, 0.0};
  sample.is_content = {0, 1, 1, 0};
  sample.predicted_class = 1;
  sample.class_prob = 0.75;
  const std::string html = highlights_html("demo & test", {sample});
  std::string error;
  CHECK_MESSAGE(xml_well_formed(html, &error), error);
  CHECK(html.find("&lt;dog&gt;") != std::string::npos);
  CHECK(html.find("demo &amp; test") != std::string::npos);
  CHECK(html.find("rgba(255,130,0,1)") != std::string::npos);  // max score
  CHECK(html.find("rgba(255,130,0,0)") != std::string::npos);  // min score
}

TEST_CASE("the well-formedness checker catches broken markup") {
  std::string error;
  CHECK(xml_well_formed("<a><b x=\"1\"/><c>t</c></a>", &error));
  CHECK_FALSE(xml_well_formed("<a><b></a>", &error));
  CHECK_FALSE(xml_well_formed("<a x=unquoted></a>", &error));
  CHECK_FALSE(xml_well_formed("<a>bare & ampersand</a>", &error));
  CHECK_FALSE(xml_well_formed("<a>", &error));
}

TEST_CASE("rankings and overlap json match their schemas") {
  std::vector<ClassRanking> rankings(2);
  rankings[0].cls = 0;
  rankings[0].tokens = {{"alpha", 2.0}, {"beta", 1.0}};
  rankings[1].cls = 1;
  rankings[1].tokens = {{"gamma", 3.0}};
  nlohmann::ordered_json rj = rankings_to_json(rankings);
  std::ifstream per_class_schema_file(std::string(TEST_SOURCE_DIR) +
                                      "/../schemas/rankings_per_class.schema.json");
  nlohmann::json per_class_schema = nlohmann::json::parse(per_class_schema_file);
  std::string error;
  for (const auto& [cls, tokens] : rj.items()) {
    CHECK_MESSAGE(validate_schema(tokens, per_class_schema, &error), error);
  }

  OverlapReport report = overlap(rankings, 1);
  nlohmann::ordered_json oj = overlap_to_json({report}, "decoded_gradcam_l3");
  std::ifstream overlap_schema_file(std::string(TEST_SOURCE_DIR) +
                                    "/../schemas/overlap.schema.json");
  nlohmann::json overlap_schema = nlohmann::json::parse(overlap_schema_file);
  CHECK_MESSAGE(validate_schema(oj, overlap_schema, &error), error);
}
