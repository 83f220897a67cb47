// Regenerates the JSON files under fixtures/ from the built-in fixtures.

#include <fstream>
#include <iostream>

#include "dynstab/fixtures.hpp"
#include "dynstab/io.hpp"
#include "support/helpers.hpp"

int main(int argc, char** argv) {
  const std::string dir = argc > 1 ? argv[1] : "fixtures";
  for (const std::string& name : dynstab::fixture_names()) {
    dynstab::Fixture f = dynstab::load_fixture(name);
    {
      std::ofstream out(dir + "/" + name + ".json");
      out << dynstab::economy_to_json(f.economy).dump(2) << "\n";
    }
    for (const auto& [mname, m] : f.matchings) {
      std::ofstream out(dir + "/" + name + "_" + mname + ".json");
      out << dynstab::matching_to_json(m, f.economy).dump(2) << "\n";
    }
    std::cout << name << " written\n";
  }
  // an exchangeable two-branch economy on which delay-check finds a witness
  testsupport::DelayFixture fx = testsupport::make_delay_fixture(false, 10, 1, dynstab::Rational(1, 2));
  {
    std::ofstream out(dir + "/delay_demo.json");
    out << dynstab::economy_to_json(fx.economy).dump(2) << "\n";
  }
  {
    std::ofstream out(dir + "/delay_demo_matching.json");
    out << dynstab::matching_to_json(fx.matching, fx.economy).dump(2) << "\n";
  }
  std::cout << "delay_demo written\n";
  return 0;
}
