/* device map of the simulated machine */
#define IOBASE_TIMER 0x10
#define IRQ_TIMER 0
#define VEC_TIMER 16
#define IOBASE_TTY 0x20
#define IRQ_TTY 1
#define VEC_TTY 17
#define IOBASE_DISK 0x30
#define IRQ_DISK 2
#define VEC_DISK 18
#define IOBASE_DMA 0x40
#define IRQ_DMA 3
#define VEC_DMA 19
#define DISK_TRACKS 64
#define DISK_SECTORS 16
