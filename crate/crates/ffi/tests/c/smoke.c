#include <stdio.h>
#include "hdbell.h"

int main(void) {
    HdbState *psi = NULL;
    HdbDensity *rho = NULL;
    double f = 0.0;
    char msg[256];

    if (hdb_bell_state(4, 1, 2, HDB_CONVENTION_MINUS, &psi) != HDB_STATUS_OK) return 1;
    if (hdb_density_from_state(psi, &rho) != HDB_STATUS_OK) return 2;
    if (hdb_fidelity(rho, psi, &f) != HDB_STATUS_OK) return 3;
    if (f < 1.0 - 1e-12) return 4;
    if (hdb_bell_state(4, 9, 0, HDB_CONVENTION_MINUS, &psi) != HDB_STATUS_INVALID_ARGUMENT) return 5;
    if (hdb_last_error(msg, sizeof msg) == 0) return 6;
    hdb_density_free(rho);
    hdb_state_free(psi);
    printf("%s\n", hdb_version());
    return 0;
}
