// Test stand-in for an external inpainting generator. Reads the JSON job
// file it is handed, copies the source image to output_path, and succeeds.
// Jobs whose image filename contains "fail" exit nonzero, exercising the
// retry/skip path.
#include <fstream>
#include <iostream>
#include <string>

#include <nlohmann/json.hpp>

#include "maniloc/image.hpp"

int main(int argc, char** argv) {
    if (argc != 2) {
        std::cerr << "usage: stub_inpainter <job.json>\n";
        return 2;
    }
    std::ifstream in(argv[1]);
    if (!in) return 2;
    nlohmann::json job = nlohmann::json::parse(in, nullptr, false);
    if (job.is_discarded()) return 2;
    const std::string image_path = job.at("image_path").get<std::string>();
    if (image_path.find("fail") != std::string::npos) return 1;
    const auto image = maniloc::read_png(image_path);
    maniloc::write_png(job.at("output_path").get<std::string>(), image);
    return 0;
}
