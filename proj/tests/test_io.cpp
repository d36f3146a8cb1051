#include <catch2/catch_amalgamated.hpp>

#include <sstream>

#include "gridless/io.hpp"
#include "oracles.hpp"

using namespace gridless;

namespace {

long line_of(const std::string& text, bool covariance) {
  std::istringstream is(text);
  try {
    if (covariance) {
      read_covariance_csv(is);
    } else {
      read_ensemble_csv(is);
    }
  } catch (const IoError& e) {
    return e.line();
  }
  return -100;
}

}  // namespace

TEST_CASE("ensemble csv round trip for every mask kind", "[io]") {
  CounterRng rng(10);
  const CMatrix z = oracle::random_matrix(6, 3, rng);
  const std::vector<std::pair<Eigen::Index, Eigen::Index>> entries{{0, 0}, {2, 0}, {1, 1}, {5, 2}, {3, 2}};
  const std::vector<ObservationMask> masks{ObservationMask::full(6, 3), ObservationMask::common_rows(6, 3, {1, 4, 5}),
                                           ObservationMask::entrywise(6, 3, entries)};
  for (const ObservationMask& m : masks) {
    std::stringstream ss;
    write_ensemble_csv(ss, z, m);
    const EnsembleData back = read_ensemble_csv(ss);
    REQUIRE(back.mask.kind() == m.kind());
    REQUIRE((back.mask.pattern() == m.pattern()).all());
    REQUIRE((back.z - mask_project(z, m)).norm() == 0.0);
  }
}

TEST_CASE("ensemble csv errors carry line numbers", "[io]") {
  CHECK(line_of("", false) == 1);
  CHECK(line_of("\n\n", false) == 1);
  CHECK(line_of("i,x1_re\n0,1\n", false) == 1);
  CHECK(line_of("i,x1_re,x1_im\n0,1,2\n1,3\n", false) == 3);
  CHECK(line_of("i,x1_re,x1_im\n0,1,abc\n", false) == 2);
  CHECK(line_of("i,x1_re,x1_im\n0,1,2\n5,1,2\n", false) == 3);
  CHECK(line_of("i,x1_re,x1_im\n", false) == 2);
  CHECK(line_of("i,y1_re,y1_im\n0,1,2\n", false) == 1);
}

TEST_CASE("covariance csv round trip", "[io]") {
  CounterRng rng(11);
  const CMatrix g = oracle::random_matrix(3, 5, rng);
  CovarianceSample s;
  s.sigma = g * g.adjoint() / 5.0;
  s.omega = {0, 3, 7};
  s.n = 9;
  s.L = 5;
  std::stringstream ss;
  write_covariance_csv(ss, s);
  const CovarianceSample back = read_covariance_csv(ss);
  CHECK(back.n == 9);
  CHECK(back.L == 5);
  CHECK(back.omega == s.omega);
  CHECK((back.sigma - s.sigma).norm() == 0.0);
  CHECK_NOTHROW(back.validate());
}

TEST_CASE("covariance csv errors", "[io]") {
  CHECK(line_of("", true) == 1);
  CHECK(line_of("row,c1_re,c1_im\n0,1,0\n", true) == 1);
  CHECK(line_of("# {\"n\": 4}\n", true) == 1);
  const std::string head = "# {\"n\":4,\"m\":1,\"omega\":[2],\"L\":3}\n";
  CHECK(line_of(head, true) == 2);
  CHECK(line_of(head + "row,c1_re,c1_im,c2_re,c2_im\n", true) == 2);
  CHECK(line_of(head + "row,c1_re,c1_im\n0,1,nan\n", true) == 3);
  CHECK(line_of(head + "row,c1_re,c1_im\n0,1,0\n1,1,0\n", true) == 4);
  CHECK(line_of(head + "row,c1_re,c1_im\n", true) == 3);

  std::istringstream ok(head + "row,c1_re,c1_im\n0,2.5,0\n");
  const CovarianceSample s = read_covariance_csv(ok);
  CHECK(s.sigma(0, 0) == cplx(2.5, 0.0));
}

TEST_CASE("non-PSD covariance parses but fails validation", "[io]") {
  std::istringstream is("# {\"n\":3,\"m\":2,\"omega\":[0,2],\"L\":4}\nrow,c1_re,c1_im,c2_re,c2_im\n0,1,0,2,0\n1,2,0,1,0\n");
  const CovarianceSample s = read_covariance_csv(is);
  CHECK_THROWS_AS(s.validate(), ValidationError);
}

TEST_CASE("missing files are I/O errors", "[io]") {
  CHECK_THROWS_AS(read_ensemble_file("/nonexistent/dir/file.csv"), IoError);
  CHECK_THROWS_AS(read_covariance_file("/nonexistent/dir/file.csv"), IoError);
}
