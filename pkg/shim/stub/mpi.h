/* Minimal MPI surface for exercising the interposer without a real MPI. */
#ifndef STUB_MPI_H
#define STUB_MPI_H

#define MPI_SUCCESS 0

typedef int MPI_Comm;
#define MPI_COMM_WORLD ((MPI_Comm)91)

int MPI_Init(int *argc, char ***argv);
int MPI_Comm_rank(MPI_Comm comm, int *rank);
int MPI_Comm_size(MPI_Comm comm, int *size);
int MPI_Barrier(MPI_Comm comm);
int MPI_Abort(MPI_Comm comm, int errorcode);
void mpi_init_(int *ierror);

#endif
