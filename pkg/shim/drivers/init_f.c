/* Drives the Fortran-convention entry point without a Fortran compiler. */
#include <stdio.h>

void mpi_init_(int *ierror);

int main(void) {
  int ierror = -1;
  mpi_init_(&ierror);
  printf("mpi_init_ status %d\n", ierror);
  return ierror == 0 ? 0 : 3;
}
