#pragma once

// Small-signal stability certification of lossy multi-machine swing equations.

#include "swingcert/case_io.hpp"
#include "swingcert/equilibrium.hpp"
#include "swingcert/errors.hpp"
#include "swingcert/graphcert.hpp"
#include "swingcert/linalg.hpp"
#include "swingcert/margin.hpp"
#include "swingcert/netmodel.hpp"
#include "swingcert/parallel.hpp"
#include "swingcert/report.hpp"
#include "swingcert/simulate.hpp"
#include "swingcert/spectral.hpp"
