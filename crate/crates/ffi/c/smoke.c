#include <math.h>
#include <stdio.h>
#include <stdlib.h>

#include "zerosum.h"

#define CHECK(call)                                                        \
  do {                                                                     \
    enum ZsStatus st_ = (call);                                            \
    if (st_ != ZS_STATUS_OK) {                                             \
      fprintf(stderr, "%s failed: %d %s\n", #call, st_, zs_last_error()); \
      return 1;                                                            \
    }                                                                      \
  } while (0)

int main(void) {
  const double shares[3] = {0.90, 0.06, 0.04};
  const double lambda[4] = {4.0, -0.6, -0.6, 3.0};
  struct ZsScenario *sc = NULL;
  CHECK(zs_scenario_new(shares, 3, lambda, NULL, -1, &sc));

  double sigma[9];
  CHECK(zs_full_covariance(sc, sigma, 9));
  if (fabs(sigma[8] - 1991.25) > 1e-9 || fabs(sigma[2] + 89.1) > 1e-9) {
    fprintf(stderr, "unexpected sigma\n");
    return 1;
  }

  double means[3], cov[9], violation;
  CHECK(zs_simulate(sc, 10000, 1, ZS_DISTRIBUTION_NORMAL, means, 3, cov, 9, &violation));
  if (violation > 1e-10) {
    return 1;
  }

  const double bad[3] = {0.5, 0.6, 0.1};
  struct ZsScenario *other = NULL;
  if (zs_scenario_new(bad, 3, lambda, NULL, -1, &other) != ZS_STATUS_SHARES) {
    return 1;
  }

  char *json = NULL;
  CHECK(zs_analyze_json(sc, &json));
  printf("%s", json);
  zs_string_free(json);
  zs_scenario_free(sc);
  return 0;
}
