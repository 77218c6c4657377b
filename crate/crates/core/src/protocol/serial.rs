//! Serial ports and pseudo-terminals via termios.

use std::ffi::CStr;
use std::fs::{File, OpenOptions};
use std::io;
use std::os::fd::{AsRawFd, FromRawFd, RawFd};
use std::os::unix::fs::OpenOptionsExt;
use std::path::{Path, PathBuf};

fn cvt(ret: libc::c_int) -> io::Result<libc::c_int> {
    if ret < 0 {
        Err(io::Error::last_os_error())
    } else {
        Ok(ret)
    }
}

fn baud_constant(baud: u32) -> io::Result<libc::speed_t> {
    Ok(match baud {
        9600 => libc::B9600,
        19_200 => libc::B19200,
        38_400 => libc::B38400,
        57_600 => libc::B57600,
        115_200 => libc::B115200,
        230_400 => libc::B230400,
        460_800 => libc::B460800,
        921_600 => libc::B921600,
        other => {
            return Err(io::Error::new(
                io::ErrorKind::InvalidInput,
                format!("unsupported baud rate {other}"),
            ))
        }
    })
}

/// Puts a terminal into raw mode: no echo, no line editing, no newline
/// translation, 8 data bits, no parity, one stop bit.
fn make_raw(fd: RawFd, baud: Option<u32>) -> io::Result<()> {
    // SAFETY: termios is plain data; tcgetattr fills it before use.
    let mut tio: libc::termios = unsafe { std::mem::zeroed() };
    cvt(unsafe { libc::tcgetattr(fd, &mut tio) })?;
    unsafe { libc::cfmakeraw(&mut tio) };
    tio.c_cflag &= !(libc::PARENB | libc::CSTOPB | libc::CSIZE);
    tio.c_cflag |= libc::CS8 | libc::CREAD | libc::CLOCAL;
    tio.c_cc[libc::VMIN] = 1;
    tio.c_cc[libc::VTIME] = 0;
    if let Some(baud) = baud {
        let speed = baud_constant(baud)?;
        cvt(unsafe { libc::cfsetispeed(&mut tio, speed) })?;
        cvt(unsafe { libc::cfsetospeed(&mut tio, speed) })?;
    }
    cvt(unsafe { libc::tcsetattr(fd, libc::TCSANOW, &tio) })?;
    Ok(())
}

/// Opens a serial device for the protocol and returns independent read and
/// write handles.
pub fn open_serial(path: &Path, baud: u32) -> io::Result<(File, File)> {
    let file = OpenOptions::new()
        .read(true)
        .write(true)
        .custom_flags(libc::O_NOCTTY)
        .open(path)?;
    make_raw(file.as_raw_fd(), Some(baud))?;
    let writer = file.try_clone()?;
    Ok((file, writer))
}

/// A pseudo-terminal pair. The device side serves the master; a client opens
/// [`Pty::slave_path`] exactly as it would a USB serial adapter.
pub struct Pty {
    master: File,
    slave_path: PathBuf,
    // Keeps the slave open so the master does not see EIO between clients.
    _slave: File,
}

impl Pty {
    pub fn open() -> io::Result<Pty> {
        // SAFETY: standard posix_openpt/grantpt/unlockpt sequence on a fresh fd.
        let fd = cvt(unsafe { libc::posix_openpt(libc::O_RDWR | libc::O_NOCTTY) })?;
        let master = unsafe { File::from_raw_fd(fd) };
        cvt(unsafe { libc::grantpt(fd) })?;
        cvt(unsafe { libc::unlockpt(fd) })?;
        let mut buf = [0 as libc::c_char; 128];
        let rc = unsafe { libc::ptsname_r(fd, buf.as_mut_ptr(), buf.len()) };
        if rc != 0 {
            return Err(io::Error::from_raw_os_error(rc));
        }
        let name = unsafe { CStr::from_ptr(buf.as_ptr()) };
        let slave_path = PathBuf::from(name.to_string_lossy().into_owned());
        let slave = OpenOptions::new()
            .read(true)
            .write(true)
            .custom_flags(libc::O_NOCTTY)
            .open(&slave_path)?;
        make_raw(slave.as_raw_fd(), None)?;
        make_raw(master.as_raw_fd(), None)?;
        Ok(Pty {
            master,
            slave_path,
            _slave: slave,
        })
    }

    pub fn slave_path(&self) -> &Path {
        &self.slave_path
    }

    /// Read and write handles on the master side.
    pub fn master_handles(&self) -> io::Result<(File, File)> {
        Ok((self.master.try_clone()?, self.master.try_clone()?))
    }
}
