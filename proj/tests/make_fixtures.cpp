// Writes the miniature raw corpus to a directory; used by the CLI smoke test
// and handy for trying the pipeline by hand.
#include <iostream>

#include "fixtures.hpp"

int main(int argc, char** argv) {
    if (argc != 2) {
        std::cerr << "usage: make_fixtures <output-dir>\n";
        return 2;
    }
    try {
        song::fixtures::FixtureCorpus corpus = song::fixtures::make_fixture_corpus();
        song::fixtures::write_raw_fixture(argv[1], corpus);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    std::cout << "fixture corpus written to " << argv[1] << '\n';
    return 0;
}
