#pragma once

#include "dexct/eval.hpp"
#include "dexct/geometry.hpp"
#include "dexct/image.hpp"
#include "dexct/io.hpp"
#include "dexct/ipm.hpp"
#include "dexct/jtv.hpp"
#include "dexct/model.hpp"
#include "dexct/pcg.hpp"
#include "dexct/phantoms.hpp"
#include "dexct/protocol.hpp"
#include "dexct/random.hpp"
#include "dexct/simulate.hpp"
#include "dexct/spectral.hpp"
