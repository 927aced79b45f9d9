#include "doctest.h"

#include <sstream>

#include "sispersist/config.hpp"
#include "sispersist/csv.hpp"
#include "sispersist/error.hpp"

using namespace sispersist;

TEST_CASE("model config round trip") {
  const auto s = parse_model(R"({"f":[1,1],"lambda":[50,1],"mu":[1,1],"target_r0":1.5,"population":100})");
  CHECK(s.k() == 2);
  CHECK(s.groups.lambda[0] == doctest::Approx(100.0 / 51));
  CHECK(s.beta == doctest::Approx(1.5));
  CHECK(*s.population == 100);
  const auto back = parse_model(to_json(s));
  CHECK(back.groups.lambda == s.groups.lambda);
  CHECK(back.beta == s.beta);
  CHECK(back.population == s.population);
}

TEST_CASE("model config defaults and errors") {
  const auto s = parse_model(R"({"f":[0.5,0.5],"beta":2})");
  CHECK(s.groups.mu == std::vector<double>{1, 1});
  CHECK(s.gamma == 1.0);
  CHECK(s.stages == 1);
  CHECK_THROWS_AS(parse_model("{"), ConfigError);
  CHECK_THROWS_AS(parse_model(R"({"f":[0.5,0.5]})"), ConfigError);
  CHECK_THROWS_AS(parse_model(R"({"f":[0.5,0.5],"beta":1,"target_r0":1})"), ConfigError);
  CHECK_THROWS_AS(parse_model(R"({"f":[0.5,0.5],"k":3,"beta":1})"), ConfigError);
  CHECK_THROWS_AS(parse_model(R"({"f":"x","beta":1})"), ConfigError);
  CHECK_THROWS_AS(parse_model(R"({"f":[0.5,-0.5],"beta":1})"), InvalidModel);
  CHECK_THROWS_AS(load_model("/nonexistent/path.json"), ConfigError);
}

TEST_CASE("degree config") {
  const char* text = R"({"kappa":0.5,"gamma":1,"d_max":6,"degrees":[[3,5,0.5],[3,1,0.5]]})";
  CHECK(is_degree_config(text));
  const auto d = parse_degrees(text);
  CHECK(d.support.size() == 2);
  const auto again = parse_degrees(to_json(d));
  CHECK(again.support[1].d_out == 1);
  CHECK_THROWS_AS(parse_degrees(R"({"kappa":1,"degrees":[[1,2]]})"), ConfigError);
}

TEST_CASE("csv formatting") {
  CHECK(fmt(0.1) == "0.1");
  CHECK(std::stod(fmt(1.0 / 3)) == 1.0 / 3);
  CHECK(fmt(42) == "42");
  CsvTable t;
  t.add_meta("seed", "7");
  t.columns = {"a", "b"};
  t.rows.push_back({"1", "2"});
  std::ostringstream os;
  t.write(os);
  CHECK(os.str() == "# seed: 7\na,b\n1,2\n");
}
