#pragma once

#include <array>

namespace memtrain::golden {

// Frozen output of tests/oracles/schottky_oracle.py (50-digit arithmetic).
constexpr std::array<std::array<double, 2>, 20> kCurrentGolden{{
    {0.1, 3.3234248801582541e-7},
    {0.1214280293453858, 4.7209830847892221e-7},
    {0.14744766310703875, 6.814346550401204e-7},
    {0.17904279162670061, 1.001080962554583e-6},
    {0.21740813355726797, 1.49950390610264e-6},
    {0.26399441221517491, 2.2946642398980368e-6},
    {0.32056321233482135, 3.5952675972452381e-6},
    {0.38925359154443827, 5.781330260879366e-6},
    {0.47266296536854869, 9.566635075436376e-6},
    {0.57394532429249203, 1.6337784564960926e-5},
    {0.69693049680835693, 2.8888602927105005e-5},
    {0.84626896818139471, 5.3076053669971323e-5},
    {1.0276077310241976, 0.00010171983208061665},
    {1.2478038171835159, 0.00020422866702988257},
    {1.5151835853024438, 0.00043161001070484023},
    {1.8398575685975202, 0.00096516086760303962},
    {2.2341027883098986, 0.0022969012263837909},
    {2.7128269893950261, 0.0058543050144604947},
    {3.2941323527721384, 0.016092952652841222},
    {4.0, 0.048080616884838429},
}};

constexpr std::array<std::array<double, 3>, 4> kFamilyEnergyGolden{{
    {20e-9, 3.6, 1.890816388880057e-9},
    {1e-6, 2.8, 1.9224354139089235e-8},
    {0.2e-3, 2.0, 5.5597422326279691e-7},
    {2e-3, 1.5, 1.2438616087277984e-6},
}};

}  // namespace memtrain::golden
