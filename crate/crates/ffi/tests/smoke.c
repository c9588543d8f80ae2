#include <math.h>
#include <stdio.h>
#include "fda.h"

#define CHECK(call)                                                              \
    do {                                                                         \
        FdaStatus s_ = (call);                                                   \
        if (s_ != FDA_STATUS_OK) {                                               \
            fprintf(stderr, "%s failed (%d): %s\n", #call, (int)s_,              \
                    fda_last_error() ? fda_last_error() : "?");                  \
            return 1;                                                            \
        }                                                                        \
    } while (0)

int main(void) {
    FdaBasis *basis = NULL;
    CHECK(fda_basis_new(4, 6, &basis));

    double values[6];
    CHECK(fda_basis_eval(basis, 0.25, values, 6));
    double sum = 0.0;
    for (int j = 0; j < 6; j++) sum += values[j];
    if (fabs(sum - 1.0) > 1e-12) return 2;

    double coeffs[4 * 6];
    for (int k = 0; k < 24; k++) coeffs[k] = sin(0.9 * k) + 0.2 * (k / 6);
    FdaDataset *data = NULL;
    CHECK(fda_dataset_new(basis, coeffs, 4, &data));

    FdaFpca *fpca = NULL;
    CHECK(fda_fpca_fit(data, 0, &fpca));
    size_t r = fda_fpca_num_components(fpca);
    double eig[8];
    CHECK(fda_fpca_eigenvalues(fpca, eig, 8));
    if (r == 0 || eig[0] <= 0.0) return 3;

    if (fda_basis_eval(basis, 0.25, values, 2) != FDA_STATUS_BUFFER_TOO_SMALL) return 4;
    if (fda_last_error() == NULL) return 5;

    printf("fda %s: %zu components, first eigenvalue %.6f\n", fda_version(), r, eig[0]);
    fda_fpca_free(fpca);
    fda_dataset_free(data);
    fda_basis_free(basis);
    return 0;
}
