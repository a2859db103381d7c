#pragma once

#include "msrlab/agreement.hpp"
#include "msrlab/config.hpp"
#include "msrlab/csv.hpp"
#include "msrlab/entities.hpp"
#include "msrlab/error.hpp"
#include "msrlab/gitio.hpp"
#include "msrlab/identity.hpp"
#include "msrlab/network.hpp"
#include "msrlab/pipeline.hpp"
#include "msrlab/report.hpp"
#include "msrlab/rng.hpp"
#include "msrlab/runner.hpp"
#include "msrlab/stats.hpp"
#include "msrlab/study_brooks.hpp"
#include "msrlab/study_roles.hpp"
#include "msrlab/study_turnover.hpp"
#include "msrlab/svg.hpp"
#include "msrlab/windows.hpp"
