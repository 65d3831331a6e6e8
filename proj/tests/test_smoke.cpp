#include <catch2/catch_amalgamated.hpp>

#include "cinesplat/cinesplat.hpp"

using namespace cinesplat;

TEST_CASE("library headers compile and basic types construct") {
  CineImage img(8, 8, 2);
  REQUIRE(img.data.size() == 128);
  Rng64 rng(42);
  REQUIRE(rng.uniform() >= 0.0);
  REQUIRE(rng.uniform() < 1.0);
}
