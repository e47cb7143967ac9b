// Prints the cost table for each preset in its continual forms.

#include <cstdio>

#include "costgcn/costgcn.hpp"

using namespace costgcn;

int main() {
    for (auto kind : {PresetKind::stgcn, PresetKind::agcn, PresetKind::str}) {
        const NetworkConfig reg = preset(kind, Variant::reg);
        for (auto v : {Variant::co, Variant::co_star}) {
            std::printf("== %s %s (T=300)\n", to_string(kind), to_string(v));
            std::printf("%s\n", format_table(make_report(reg, preset(kind, v), 300)).c_str());
        }
    }
}
