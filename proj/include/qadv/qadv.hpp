#pragma once

#include "qadv/error.hpp"
#include "qadv/data.hpp"
#include "qadv/pca.hpp"
#include "qadv/qsim.hpp"
#include "qadv/qpca.hpp"
#include "qadv/detectors.hpp"
#include "qadv/qmeans.hpp"
#include "qadv/advantage.hpp"
