#pragma once

#include <array>
#include <span>

namespace rws::detail {

// Extremal-phase Daubechies lowpass (synthesis) filters, orders 1..10,
// normalized to sum sqrt(2). Tap k multiplies z^k.
inline constexpr std::array<double, 2> db1_taps = {
    7.071067811865475244e-1,
    7.071067811865475244e-1,
};

inline constexpr std::array<double, 4> db2_taps = {
    4.8296291314453414337e-1,
    8.3651630373780790558e-1,
    2.2414386804201338103e-1,
    -1.2940952255126038117e-1,
};

inline constexpr std::array<double, 6> db3_taps = {
    3.32670552950082616e-1,
    8.0689150931109257649e-1,
    4.598775021184915701e-1,
    -1.350110200102545887e-1,
    -8.5441273882026661693e-2,
    3.5226291885709536603e-2,
};

inline constexpr std::array<double, 8> db4_taps = {
    2.3037781330889650086e-1,
    7.1484657055291564709e-1,
    6.3088076792985890788e-1,
    -2.7983769416859854211e-2,
    -1.8703481171909308408e-1,
    3.0841381835560763627e-2,
    3.2883011666885199735e-2,
    -1.0597401785069032105e-2,
};

inline constexpr std::array<double, 10> db5_taps = {
    1.6010239797419291448e-1,
    6.0382926979718967054e-1,
    7.2430852843777292773e-1,
    1.3842814590132073151e-1,
    -2.4229488706638203186e-1,
    -3.2244869584638374648e-2,
    7.7571493840045713523e-2,
    -6.2414902127982742742e-3,
    -1.2580751999081999469e-2,
    3.335725285473771278e-3,
};

inline constexpr std::array<double, 12> db6_taps = {
    1.1154074335010946362e-1,
    4.9462389039845308568e-1,
    7.5113390802109535068e-1,
    3.1525035170919762909e-1,
    -2.2626469396543982008e-1,
    -1.2976686756726193556e-1,
    9.7501605587323049102e-2,
    2.7522865530305728626e-2,
    -3.1582039317486029565e-2,
    5.5384220116149613925e-4,
    4.7772575109455106396e-3,
    -1.0773010853084795649e-3,
};

inline constexpr std::array<double, 14> db7_taps = {
    7.785205408500917902e-2,
    3.9653931948191730654e-1,
    7.2913209084623511992e-1,
    4.6978228740519312247e-1,
    -1.4390600392856497541e-1,
    -2.2403618499387498264e-1,
    7.1309219266830264751e-2,
    8.0612609151083071913e-2,
    -3.802993693501441358e-2,
    -1.6574541630666880654e-2,
    1.2550998556099840613e-2,
    4.2957797292136652113e-4,
    -1.8016407040474909153e-3,
    3.5371379997452024845e-4,
};

inline constexpr std::array<double, 16> db8_taps = {
    5.4415842243104009955e-2,
    3.1287159091429997066e-1,
    6.7563073629728980681e-1,
    5.8535468365420671277e-1,
    -1.5829105256349305667e-2,
    -2.8401554296154692652e-1,
    4.7248457391328277036e-4,
    1.2874742662047845886e-1,
    -1.736930100180754617e-2,
    -4.4088253930794751507e-2,
    1.3981027917398281649e-2,
    8.7460940474057767164e-3,
    -4.8703529934515743104e-3,
    -3.917403733769470463e-4,
    6.7544940645056936637e-4,
    -1.1747678412476953373e-4,
};

inline constexpr std::array<double, 18> db9_taps = {
    3.8077947363878346589e-2,
    2.4383467461259035373e-1,
    6.048231236901111119e-1,
    6.5728807805130053808e-1,
    1.3319738582500757619e-1,
    -2.9327378327917490881e-1,
    -9.6840783222976460514e-2,
    1.4854074933810638014e-1,
    3.0725681479333379212e-2,
    -6.7632829061329973676e-2,
    2.5094711483145195759e-4,
    2.2361662123679097205e-2,
    -4.7232047577513972779e-3,
    -4.2815036824634298345e-3,
    1.8476468830562264766e-3,
    2.3038576352319596721e-4,
    -2.5196318894271013697e-4,
    3.9347320316271599481e-5,
};

inline constexpr std::array<double, 20> db10_taps = {
    2.6670057900555553587e-2,
    1.8817680007769148902e-1,
    5.2720118893172558648e-1,
    6.8845903945360356574e-1,
    2.8117234366057746075e-1,
    -2.4984642432731537942e-1,
    -1.959462743773770435e-1,
    1.2736934033579326008e-1,
    9.305736460357235116e-2,
    -7.1394147166397087145e-2,
    -2.9457536821875812858e-2,
    3.321267405934100174e-2,
    3.6065535669561696554e-3,
    -1.0733175483330575044e-2,
    1.3953517470529011658e-3,
    1.9924052951850561172e-3,
    -6.8585669495971162656e-4,
    -1.1646685512928545095e-4,
    9.3588670320069591334e-5,
    -1.3264202894521244812e-5,
};

inline std::span<const double> daubechies_taps(int order) {
  switch (order) {
    case 1: return db1_taps;
    case 2: return db2_taps;
    case 3: return db3_taps;
    case 4: return db4_taps;
    case 5: return db5_taps;
    case 6: return db6_taps;
    case 7: return db7_taps;
    case 8: return db8_taps;
    case 9: return db9_taps;
    case 10: return db10_taps;
    default: return {};
  }
}

}  // namespace rws::detail
