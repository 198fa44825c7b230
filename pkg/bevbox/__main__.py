import sys

from bevbox.cli import main


sys.exit(main())
