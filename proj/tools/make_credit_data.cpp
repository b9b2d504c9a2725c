#include <CLI11.hpp>
#include <cstdint>
#include <iostream>

#include "ifair/credit_demo.hpp"

int main(int argc, char** argv) {
    CLI::App app{"regenerate the bundled credit-scoring demo CSV"};
    std::string out = "data/german_credit_demo.csv";
    ifair::CreditDemoConfig cfg;
    app.add_option("--out", out, "output CSV path");
    app.add_option("--n", cfg.n, "number of applicants");
    app.add_option("--seed", cfg.seed, "generator seed");
    app.add_option("--young-rate", cfg.young_rate, "protected-group fraction");
    CLI11_PARSE(app, argc, argv);

    try {
        ifair::write_credit_demo_csv(out, cfg);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    std::cout << "wrote " << cfg.n << " rows to " << out << "\n";
    return 0;
}
